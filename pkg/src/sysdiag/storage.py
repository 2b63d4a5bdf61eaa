"""File formats: annotation files, detection files, and prediction logs.

The annotation schema ("diagramnet/1") keeps a diagram's listing,
localization, and connection ground truth plus the QA items in one
record. Loading is schema-validated with JSON-pointer-style paths in
error messages; unknown fields are preserved verbatim so newer files
round-trip through older code. Saving is canonical: fixed key order,
two-space indent, unknown keys after known ones.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .model import (
    BBox,
    Component,
    Diagram,
    Edge,
    QAItem,
    RecognitionResult,
)

SCHEMA_VERSION = "diagramnet/1"

_DIAGRAM_KEYS = ("id", "image_ref", "width_px", "height_px", "components", "edges")
_COMPONENT_KEYS = ("index", "name", "bbox")
_EDGE_KEYS = ("src", "dst", "directed")
_QA_KEYS = ("id", "diagram_id", "question", "options", "reasoning", "answer")


class SchemaError(ValueError):
    """Schema violation with a JSON-pointer-style path to the field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class AnnotationFile:
    diagrams: tuple[Diagram, ...]
    qa: tuple[QAItem, ...]
    schema_version: str = SCHEMA_VERSION
    extra: dict[str, Any] = field(default_factory=dict, compare=False)

    def diagram_ids(self) -> set[str]:
        return {d.id for d in self.diagrams}


def _expect(value, types, path: str, what: str):
    if not isinstance(value, types) or isinstance(value, bool) and bool not in (
        types if isinstance(types, tuple) else (types,)
    ):
        raise SchemaError(path, f"expected {what}, got {type(value).__name__}")
    return value


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"{path}/{key}", "missing required field")
    return obj[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected number, got {type(value).__name__}")
    return float(value)


def _extras(obj: dict, known: Sequence[str]) -> dict[str, Any]:
    return {k: v for k, v in obj.items() if k not in known}


def _load_bbox(raw, path: str) -> BBox:
    _expect(raw, list, path, "array [x, y, w, h]")
    if len(raw) != 4:
        raise SchemaError(path, f"expected 4 numbers, got {len(raw)}")
    return BBox(*(_number(v, f"{path}/{i}") for i, v in enumerate(raw)))


def _load_component(raw, path: str) -> Component:
    _expect(raw, dict, path, "object")
    index = _require(raw, "index", path)
    if isinstance(index, bool) or not isinstance(index, int) or index < 1:
        raise SchemaError(f"{path}/index", "expected positive integer")
    name = _expect(_require(raw, "name", path), str, f"{path}/name", "string")
    bbox = _load_bbox(_require(raw, "bbox", path), f"{path}/bbox")
    return Component(index=index, name=name, bbox=bbox,
                     extra=_extras(raw, _COMPONENT_KEYS))


def _load_edge(raw, path: str) -> Edge:
    _expect(raw, dict, path, "object")
    src = _require(raw, "src", path)
    dst = _require(raw, "dst", path)
    for key, v in (("src", src), ("dst", dst)):
        if isinstance(v, bool) or not isinstance(v, int):
            raise SchemaError(f"{path}/{key}", "expected integer")
    directed = raw.get("directed", True)
    _expect(directed, bool, f"{path}/directed", "boolean")
    return Edge(src=src, dst=dst, directed=directed, extra=_extras(raw, _EDGE_KEYS))


def _load_diagram(raw, path: str) -> Diagram:
    _expect(raw, dict, path, "object")
    did = _expect(_require(raw, "id", path), str, f"{path}/id", "string")
    image_ref = _expect(_require(raw, "image_ref", path), str, f"{path}/image_ref", "string")
    dims = []
    for key in ("width_px", "height_px"):
        v = _require(raw, key, path)
        if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
            raise SchemaError(f"{path}/{key}", "expected positive integer")
        dims.append(v)
    components = tuple(
        _load_component(c, f"{path}/components/{i}")
        for i, c in enumerate(_expect(raw.get("components", []), list, f"{path}/components", "array"))
    )
    edges = tuple(
        _load_edge(e, f"{path}/edges/{i}")
        for i, e in enumerate(_expect(raw.get("edges", []), list, f"{path}/edges", "array"))
    )
    return Diagram(id=did, image_ref=image_ref, width_px=dims[0], height_px=dims[1],
                   components=components, edges=edges, extra=_extras(raw, _DIAGRAM_KEYS))


def _load_qa(raw, path: str) -> QAItem:
    _expect(raw, dict, path, "object")
    qid = _expect(_require(raw, "id", path), str, f"{path}/id", "string")
    question = _expect(_require(raw, "question", path), str, f"{path}/question", "string")
    raw_options = _expect(_require(raw, "options", path), list, f"{path}/options", "array")
    options = []
    for i, pair in enumerate(raw_options):
        ppath = f"{path}/options/{i}"
        _expect(pair, list, ppath, "[label, text] pair")
        if len(pair) != 2 or not all(isinstance(v, str) for v in pair):
            raise SchemaError(ppath, "expected [label, text] string pair")
        options.append((pair[0], pair[1]))
    answer = _expect(_require(raw, "answer", path), str, f"{path}/answer", "string")
    diagram_id = raw.get("diagram_id")
    if diagram_id is not None:
        _expect(diagram_id, str, f"{path}/diagram_id", "string")
    reasoning = raw.get("reasoning")
    if reasoning is not None:
        _expect(reasoning, str, f"{path}/reasoning", "string")
    return QAItem(id=qid, question=question, options=tuple(options), answer=answer,
                  diagram_id=diagram_id, reasoning=reasoning, extra=_extras(raw, _QA_KEYS))


def load_annotations(path: str | Path) -> AnnotationFile:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    _expect(raw, dict, "", "object")
    version = _expect(_require(raw, "schema_version", ""), str, "/schema_version", "string")
    if version != SCHEMA_VERSION:
        raise SchemaError("/schema_version", f"unsupported version {version!r}")
    diagrams = tuple(
        _load_diagram(d, f"/diagrams/{i}")
        for i, d in enumerate(_expect(raw.get("diagrams", []), list, "/diagrams", "array"))
    )
    qa = tuple(
        _load_qa(q, f"/qa/{i}")
        for i, q in enumerate(_expect(raw.get("qa", []), list, "/qa", "array"))
    )
    return AnnotationFile(diagrams=diagrams, qa=qa, schema_version=version,
                          extra=_extras(raw, ("schema_version", "diagrams", "qa")))


def _bbox_to_json(b: BBox) -> list[float]:
    return [b.x, b.y, b.w, b.h]


def _component_to_json(c: Component) -> dict:
    out = {"index": c.index, "name": c.name, "bbox": _bbox_to_json(c.bbox)}
    out.update(sorted(c.extra.items()))
    return out


def _edge_to_json(e: Edge) -> dict:
    out = {"src": e.src, "dst": e.dst, "directed": e.directed}
    out.update(sorted(e.extra.items()))
    return out


def _diagram_to_json(d: Diagram) -> dict:
    out = {
        "id": d.id,
        "image_ref": d.image_ref,
        "width_px": d.width_px,
        "height_px": d.height_px,
        "components": [_component_to_json(c) for c in d.components],
        "edges": [_edge_to_json(e) for e in d.edges],
    }
    out.update(sorted(d.extra.items()))
    return out


def _qa_to_json(q: QAItem) -> dict:
    out: dict[str, Any] = {"id": q.id}
    if q.diagram_id is not None:
        out["diagram_id"] = q.diagram_id
    out["question"] = q.question
    out["options"] = [[label, text] for label, text in q.options]
    if q.reasoning is not None:
        out["reasoning"] = q.reasoning
    out["answer"] = q.answer
    out.update(sorted(q.extra.items()))
    return out


def annotations_to_json(a: AnnotationFile) -> dict:
    out: dict[str, Any] = {
        "schema_version": a.schema_version,
        "diagrams": [_diagram_to_json(d) for d in a.diagrams],
        "qa": [_qa_to_json(q) for q in a.qa],
    }
    out.update(sorted(a.extra.items()))
    return out


def save_annotations(a: AnnotationFile, path: str | Path) -> None:
    _write_text(path, json.dumps(annotations_to_json(a), indent=2) + "\n")


# ---------------------------------------------------------------- detections

def load_detections(path: str | Path) -> dict[str, list[tuple[BBox, float]]]:
    """Detections file: map diagram_id -> [{"bbox": [x,y,w,h], "conf": c}]."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    _expect(raw, dict, "", "object mapping diagram_id to detections")
    out: dict[str, list[tuple[BBox, float]]] = {}
    for did, entries in raw.items():
        _expect(entries, list, f"/{did}", "array")
        boxes = []
        for i, entry in enumerate(entries):
            path_i = f"/{did}/{i}"
            _expect(entry, dict, path_i, "object")
            box = _load_bbox(_require(entry, "bbox", path_i), f"{path_i}/bbox")
            if box.violations():
                raise SchemaError(f"{path_i}/bbox", "; ".join(box.violations()))
            conf = _number(_require(entry, "conf", path_i), f"{path_i}/conf")
            if not (0.0 <= conf <= 1.0):
                raise SchemaError(f"{path_i}/conf", f"confidence {conf} outside [0,1]")
            boxes.append((box, conf))
        out[did] = boxes
    return out


def save_detections(detections: dict[str, list[tuple[BBox, float]]], path: str | Path) -> None:
    raw = {
        did: [{"bbox": _bbox_to_json(b), "conf": conf} for b, conf in boxes]
        for did, boxes in detections.items()
    }
    _write_text(path, json.dumps(raw, indent=2) + "\n")


# ------------------------------------------------------------ prediction log

def result_to_json(r: RecognitionResult) -> dict:
    out: dict[str, Any] = {
        "diagram_id": r.diagram_id,
        "components": [_component_to_json(c) for c in r.components],
        "edges": [_edge_to_json(e) for e in r.edges],
        "answers": [[qa_id, label] for qa_id, label in r.answers],
        "provenance": r.provenance,
    }
    if r.raw is not None:
        out["raw"] = r.raw
    if r.error is not None:
        out["error"] = r.error
    return out


def result_from_json(raw: dict, path: str = "") -> RecognitionResult:
    _expect(raw, dict, path, "object")
    did = _expect(_require(raw, "diagram_id", path), str, f"{path}/diagram_id", "string")
    components = tuple(
        _load_component(c, f"{path}/components/{i}")
        for i, c in enumerate(raw.get("components", []))
    )
    edges = tuple(
        _load_edge(e, f"{path}/edges/{i}") for i, e in enumerate(raw.get("edges", []))
    )
    answers = []
    for i, pair in enumerate(raw.get("answers", [])):
        ppath = f"{path}/answers/{i}"
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError(ppath, "expected [qa_id, label] pair")
        answers.append((str(pair[0]), str(pair[1])))
    return RecognitionResult(
        diagram_id=did,
        components=components,
        edges=edges,
        answers=tuple(answers),
        provenance=raw.get("provenance", {}),
        raw=raw.get("raw"),
        error=raw.get("error"),
    )


def write_predictions(results: Iterable[RecognitionResult], path: str | Path) -> None:
    lines = [json.dumps(result_to_json(r)) for r in results]
    _write_text(path, "".join(line + "\n" for line in lines))


def read_predictions(path: str | Path) -> list[RecognitionResult]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if line:
                out.append(result_from_json(json.loads(line), path=f"/line/{i}"))
    return out


def _write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
