#!/usr/bin/env python3
"""End-to-end demo with no network: generate fixtures, run the pipeline
against scripted clients that echo the ground truth, score, and print
the report. The aggregate row must come out at exactly 1.000."""

import argparse
import tempfile
from pathlib import Path

from sysdiag.cli import main as cli
from sysdiag.fixtures import make_fixture_set


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default=None,
                        help="where to put fixtures and outputs (default: temp dir)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--parallelism", type=int, default=4)
    args = parser.parse_args()

    workdir = Path(args.workdir) if args.workdir else Path(tempfile.mkdtemp(prefix="sysdiag-"))
    annotations = make_fixture_set(workdir, seed=args.seed)
    out = workdir / "out"
    print(f"workdir: {workdir}")

    assert cli(["validate", str(annotations)]) == 0
    assert cli(["run", "--config", str(workdir / "run_config.json"),
                "--out", str(out), "--parallelism", str(args.parallelism)]) == 0
    assert cli(["score", "--predictions", str(out / "predictions.jsonl"),
                "--dataset", str(annotations), "--format", "md"]) == 0
    assert cli(["reward", "--predictions", str(out / "predictions.jsonl"),
                "--dataset", str(annotations),
                "--out", str(out / "rewards.jsonl")]) == 0
    print(f"reward breakdowns: {out / 'rewards.jsonl'}")


if __name__ == "__main__":
    main()
