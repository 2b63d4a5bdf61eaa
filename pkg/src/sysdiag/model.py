"""Core value types shared by every stage: boxes, components, edges,
diagrams, QA items, and prediction records.

All types are immutable after construction and safe to share across
worker threads. Invariant checking is data, not exceptions: build the
object, then ask :func:`validate_diagram` / :func:`validate_qa_item`
for a list of violations.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Any

# Slack allowed on x+w / y+h before a box counts as leaving the unit square.
COORD_EPS = 1e-6


def normalize_name(raw: str) -> str:
    """Canonical form used whenever two component names are compared.

    Lowercase, hyphens/underscores unified to spaces, runs of whitespace
    collapsed, leading/trailing punctuation stripped. All-punctuation
    input collapses to "" and callers treat that as a non-match.
    """
    s = raw.lower().replace("-", " ").replace("_", " ")
    s = " ".join(s.split())
    return s.strip(string.punctuation + string.whitespace)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box as fractions of image width/height: (x, y, w, h)."""

    x: float
    y: float
    w: float
    h: float

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def area(self) -> float:
        return self.w * self.h

    def violations(self) -> list[str]:
        out = []
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            out.append("origin outside unit square")
        if self.w <= 0.0 or self.h <= 0.0:
            out.append("non-positive width/height")
        if self.x + self.w > 1.0 + COORD_EPS or self.y + self.h > 1.0 + COORD_EPS:
            out.append("bbox exceeds unit square")
        return out


@dataclass(frozen=True)
class Component:
    """Named box with its row-major rank (1-based, unique per diagram)."""

    index: int
    name: str
    bbox: BBox
    extra: dict[str, Any] = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class Edge:
    """Directed connection between two component indices.

    Undirected source connections are stored as two directed edges with
    ``directed=False`` so metrics always walk one canonical form.
    Self-loops are never dropped silently; they surface as violations.
    """

    src: int
    dst: int
    directed: bool = True
    extra: dict[str, Any] = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class Diagram:
    id: str
    image_ref: str
    width_px: int
    height_px: int
    components: tuple[Component, ...] = ()
    edges: tuple[Edge, ...] = ()
    extra: dict[str, Any] = field(default_factory=dict, compare=False)

    def component_by_index(self) -> dict[int, Component]:
        return {c.index: c for c in self.components}


@dataclass(frozen=True)
class QAItem:
    """Multiple-choice question, optionally tied to a diagram image."""

    id: str
    question: str
    options: tuple[tuple[str, str], ...]
    answer: str
    diagram_id: str | None = None
    reasoning: str | None = None
    extra: dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.options)


@dataclass(frozen=True)
class RecognitionResult:
    """Per-diagram prediction: components, edges, and QA answers.

    ``provenance`` records which client produced each field; ``raw``
    optionally keeps the unparsed model replies so format rewards can be
    audited later; ``error`` is set when the whole diagram hard-failed.
    """

    diagram_id: str
    components: tuple[Component, ...] = ()
    edges: tuple[Edge, ...] = ()
    answers: tuple[tuple[str, str], ...] = ()
    provenance: dict[str, Any] = field(default_factory=dict, compare=False)
    raw: dict[str, Any] | None = None
    error: str | None = None


def validate_diagram(d: Diagram) -> list[str]:
    """Return one message per broken invariant; [] means the diagram is clean.

    Each message names the offending field (component index / edge list
    position) and the rule broken.
    """
    out: list[str] = []
    if not d.id:
        out.append("diagram: empty id")
    if d.width_px <= 0 or d.height_px <= 0:
        out.append("diagram: width_px/height_px must be positive")

    indices = [c.index for c in d.components]
    n = len(indices)
    if len(set(indices)) != n:
        out.append("components: duplicate index")
    if indices and sorted(set(indices)) != list(range(1, n + 1)):
        out.append("components: indices are not a contiguous 1..n sequence")

    for c in d.components:
        for msg in c.bbox.violations():
            out.append(f"component {c.index}: {msg}")
        if not normalize_name(c.name):
            out.append(f"component {c.index}: name empty after normalization")

    valid = set(indices)
    for pos, e in enumerate(d.edges):
        if e.src == e.dst:
            out.append(f"edge {pos}: self-loop")
        if e.src not in valid:
            out.append(f"edge {pos}: src {e.src} not a component index")
        if e.dst not in valid:
            out.append(f"edge {pos}: dst {e.dst} not a component index")
    return out


def validate_qa_item(q: QAItem, diagram_ids: set[str] | None = None) -> list[str]:
    """Violations for a QA record; diagram resolution checked when ids given."""
    out: list[str] = []
    if not q.options:
        out.append(f"qa {q.id}: no options")
    labels = q.labels
    if len(set(labels)) != len(labels):
        out.append(f"qa {q.id}: duplicate option labels")
    if q.answer not in labels:
        out.append(f"qa {q.id}: answer {q.answer!r} is not an option label")
    if diagram_ids is not None and q.diagram_id is not None and q.diagram_id not in diagram_ids:
        out.append(f"qa {q.id}: diagram_id {q.diagram_id!r} does not resolve")
    return out
