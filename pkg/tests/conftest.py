from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import pytest

from sysdiag.fixtures import make_fixture_set
from sysdiag.storage import AnnotationFile, load_annotations


@dataclass(frozen=True)
class FixtureCorpus:
    root: Path
    annotations: Path
    detections: Path
    run_config: Path
    dataset: AnnotationFile


@pytest.fixture(scope="session")
def corpus(tmp_path_factory) -> FixtureCorpus:
    root = tmp_path_factory.mktemp("fixture-corpus")
    annotations = make_fixture_set(root, seed=0, n_diagrams=5)
    return FixtureCorpus(
        root=root,
        annotations=annotations,
        detections=root / "detections.json",
        run_config=root / "run_config.json",
        dataset=load_annotations(annotations),
    )
