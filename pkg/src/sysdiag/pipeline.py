"""Three-stage recognition pipeline: perception (detect + name in
row-major order), reasoning (per-component output-connection
prediction), and knowledge (adapter-routed QA).

The reasoning stage deliberately does not feed previously predicted
edges back into later prompts: every component is queried statelessly
against the same component list, which keeps per-component calls
independent and the whole run deterministic under any parallelism.
"""

from __future__ import annotations

import base64
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from PIL import Image

from .client import ChatTurn, ClientError, CompletionResult, turn_fingerprint
from .geometry import reorder_row_major
from .model import BBox, Component, Diagram, Edge, QAItem, RecognitionResult
from .parsing import ABSTAIN, extract_single_name, parse_qa_label, parse_targets
from .storage import AnnotationFile

log = logging.getLogger(__name__)

DEFAULT_CROP_PAD = 0.10

PLACEHOLDERS = {
    "name": (),
    "conn": ("{COMPONENT_LIST}", "{SOURCE}"),
    "qa": ("{QUESTION}", "{OPTIONS}"),
}


@dataclass(frozen=True)
class PromptTemplate:
    task: str
    system: str
    user: str

    def __post_init__(self):
        if self.task not in PLACEHOLDERS:
            raise ValueError(f"unknown template task {self.task!r}")
        for ph in PLACEHOLDERS[self.task]:
            n = self.user.count(ph)
            if n != 1:
                raise ValueError(
                    f"{self.task} template must contain {ph} exactly once (found {n})"
                )


@dataclass(frozen=True)
class TemplateSet:
    name: PromptTemplate
    conn: PromptTemplate
    qa: PromptTemplate


def default_templates() -> TemplateSet:
    return TemplateSet(
        name=PromptTemplate(
            task="name",
            system="You label cropped regions from system-level block diagrams.",
            user="State the exact text label of the component shown in this crop. "
                 "Reply with the label only.",
        ),
        conn=PromptTemplate(
            task="conn",
            system="You trace directed connections in system-level block diagrams.",
            user="Components in row-major order:\n{COMPONENT_LIST}\n\n"
                 "Source component: {SOURCE}\n"
                 "List the components that receive a connection FROM the source. "
                 "Reply with a JSON array of component indices, e.g. [2, 5]. "
                 "Reply [] if the source has no outgoing connections.",
        ),
        qa=PromptTemplate(
            task="qa",
            system="You answer multiple-choice questions about circuits and "
                   "system architectures.",
            user="Question: {QUESTION}\nOptions:\n{OPTIONS}\n"
                 "Reason step by step, then give the single option label on the "
                 "last line.",
        ),
    )


def load_templates(path: str | Path) -> TemplateSet:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    kwargs = {}
    for task in ("name", "conn", "qa"):
        if task not in raw:
            raise ValueError(f"templates file missing task {task!r}")
        kwargs[task] = PromptTemplate(task=task, system=raw[task]["system"],
                                      user=raw[task]["user"])
    return TemplateSet(**kwargs)


@dataclass
class TraceEntry:
    stage: str
    key: str
    fingerprint: str
    reply: str
    strict: bool | None = None
    warnings: tuple[str, ...] = ()
    wall_time_s: float = 0.0
    attempts: int = 0
    cache_hit: bool = False
    route: str | None = None

    def to_json(self) -> dict:
        out = {
            "stage": self.stage,
            "key": self.key,
            "fingerprint": self.fingerprint,
            "reply": self.reply,
            "warnings": list(self.warnings),
            "wall_time_s": self.wall_time_s,
            "attempts": self.attempts,
            "cache_hit": self.cache_hit,
        }
        if self.strict is not None:
            out["strict"] = self.strict
        if self.route is not None:
            out["route"] = self.route
        return out


@dataclass
class DiagramTrace:
    diagram_id: str
    entries: list[TraceEntry] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"diagram_id": self.diagram_id,
                "entries": [e.to_json() for e in self.entries]}


def png_bytes(image: Image.Image) -> bytes:
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


def crop_region(image: Image.Image, bbox: BBox, pad: float = DEFAULT_CROP_PAD) -> bytes:
    """PNG bytes for a bbox crop padded by ``pad`` of the box size on
    each side and clamped to the image."""
    x0 = max(0.0, bbox.x - pad * bbox.w)
    y0 = max(0.0, bbox.y - pad * bbox.h)
    x1 = min(1.0, bbox.x2 + pad * bbox.w)
    y1 = min(1.0, bbox.y2 + pad * bbox.h)
    w, h = image.size
    left, top = int(x0 * w), int(y0 * h)
    right, bottom = max(left + 1, int(round(x1 * w))), max(top + 1, int(round(y1 * h)))
    return png_bytes(image.crop((left, top, right, bottom)))


def _image_part(data: bytes) -> tuple[str, str]:
    return ("image/png", base64.b64encode(data).decode("ascii"))


def component_list_text(components: Sequence[Component]) -> str:
    return "\n".join(f"{c.index}: {c.name}" for c in components)


def options_text(item: QAItem) -> str:
    return "\n".join(f"{label}. {text}" for label, text in item.options)


def naming_turn(templates: TemplateSet, crop_png: bytes) -> ChatTurn:
    return ChatTurn(system=templates.name.system, user_text=templates.name.user,
                    images=(_image_part(crop_png),))


def reasoning_turn(templates: TemplateSet, components: Sequence[Component],
                   source: Component, image_png: bytes | None) -> ChatTurn:
    user = templates.conn.user.replace(
        "{COMPONENT_LIST}", component_list_text(components)
    ).replace("{SOURCE}", f"{source.index}: {source.name}")
    images = (_image_part(image_png),) if image_png else ()
    return ChatTurn(system=templates.conn.system, user_text=user, images=images)


def qa_turn(templates: TemplateSet, item: QAItem,
            image_png: bytes | None) -> ChatTurn:
    user = templates.qa.user.replace("{QUESTION}", item.question).replace(
        "{OPTIONS}", options_text(item)
    )
    images = (_image_part(image_png),) if image_png is not None else ()
    return ChatTurn(system=templates.qa.system, user_text=user, images=images)


def _fan_out(items: Sequence, fn: Callable, max_workers: int) -> list:
    """Apply fn to each item, possibly concurrently, preserving order."""
    if max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


def run_perception(diagram: Diagram, boxes: Sequence[tuple[BBox, float]],
                   chat, templates: TemplateSet, trace: DiagramTrace,
                   crop_pad: float = DEFAULT_CROP_PAD,
                   image: Image.Image | None = None,
                   max_workers: int = 1) -> tuple[list[Component], dict[str, str]]:
    """Detected boxes -> named components with row-major indices 1..n.

    Returns the components plus the raw naming replies keyed by index.
    Duplicate names stay distinct through their indices; a failed naming
    call yields "UNKNOWN_<index>" and the run continues.
    """
    if not boxes:
        return [], {}
    provisional = [
        Component(index=i, name=f"_det_{i}", bbox=box)
        for i, (box, _conf) in enumerate(boxes, start=1)
    ]
    ordered = reorder_row_major(provisional)
    if image is None:
        raise ValueError("perception needs the diagram image to crop component regions")

    def name_one(comp: Component) -> tuple[Component, TraceEntry, str]:
        turn = naming_turn(templates, crop_region(image, comp.bbox, pad=crop_pad))
        fp = turn_fingerprint(turn)
        start = time.perf_counter()
        try:
            reply: CompletionResult = chat.complete(turn)
        except ClientError as exc:
            entry = TraceEntry(stage="perception", key=f"component:{comp.index}",
                               fingerprint=fp, reply="",
                               warnings=(f"naming call failed: {exc}",),
                               wall_time_s=time.perf_counter() - start)
            return (Component(comp.index, f"UNKNOWN_{comp.index}", comp.bbox), entry, "")
        name, warnings = extract_single_name(reply.text)
        if not name:
            name = f"UNKNOWN_{comp.index}"
        entry = TraceEntry(stage="perception", key=f"component:{comp.index}",
                           fingerprint=fp, reply=reply.text, warnings=warnings,
                           wall_time_s=time.perf_counter() - start,
                           attempts=reply.attempts, cache_hit=reply.cache_hit)
        return (Component(comp.index, name, comp.bbox), entry, reply.text)

    named = _fan_out(ordered, name_one, max_workers)
    components = []
    raw_replies = {}
    for comp, entry, raw in named:
        components.append(comp)
        trace.entries.append(entry)
        raw_replies[str(comp.index)] = raw
    return components, raw_replies


def run_reasoning(diagram: Diagram, components: Sequence[Component], chat,
                  templates: TemplateSet, trace: DiagramTrace,
                  image_png: bytes | None = None,
                  max_workers: int = 1) -> tuple[list[Edge], dict[str, str]]:
    """One connection query per component, assembled in source-index
    order. Parse failures cost only that component's edges."""
    if not components:
        return [], {}

    def targets_for(comp: Component) -> tuple[set[int], TraceEntry, str]:
        turn = reasoning_turn(templates, components, comp, image_png)
        fp = turn_fingerprint(turn)
        start = time.perf_counter()
        try:
            reply = chat.complete(turn)
        except ClientError as exc:
            entry = TraceEntry(stage="reasoning", key=f"component:{comp.index}",
                               fingerprint=fp, reply="",
                               warnings=(f"connection call failed: {exc}",),
                               wall_time_s=time.perf_counter() - start)
            return set(), entry, ""
        outcome = parse_targets(reply.text, components, source_index=comp.index)
        entry = TraceEntry(stage="reasoning", key=f"component:{comp.index}",
                           fingerprint=fp, reply=reply.text, strict=outcome.strict,
                           warnings=outcome.warnings,
                           wall_time_s=time.perf_counter() - start,
                           attempts=reply.attempts, cache_hit=reply.cache_hit)
        return outcome.value, entry, reply.text

    results = _fan_out(list(components), targets_for, max_workers)
    edges: list[Edge] = []
    raw_replies: dict[str, str] = {}
    seen: set[tuple[int, int]] = set()
    for comp, (targets, entry, raw) in zip(components, results):
        trace.entries.append(entry)
        raw_replies[str(comp.index)] = raw
        for t in sorted(targets):
            if (comp.index, t) not in seen:
                seen.add((comp.index, t))
                edges.append(Edge(src=comp.index, dst=t))
    return edges, raw_replies


def run_knowledge(item: QAItem, image_png: bytes | None,
                  registry: Mapping[str, Any], templates: TemplateSet,
                  trace: DiagramTrace) -> tuple[str, str]:
    """Answer one QA item through the category-routed endpoint.

    Routing: items with a diagram are "image", the rest "text_only";
    a "default" entry backs any missing category. Returns (label, raw).
    """
    category = "image" if item.diagram_id is not None else "text_only"
    chat = registry.get(category) or registry.get("default")
    fp_key = f"qa:{item.id}"
    if chat is None:
        trace.entries.append(TraceEntry(stage="knowledge", key=fp_key, fingerprint="",
                                        reply="", route=category,
                                        warnings=(f"no endpoint for category {category}",)))
        return ABSTAIN, ""
    turn = qa_turn(templates, item, image_png if category == "image" else None)
    fp = turn_fingerprint(turn)
    start = time.perf_counter()
    try:
        reply = chat.complete(turn)
    except ClientError as exc:
        trace.entries.append(TraceEntry(stage="knowledge", key=fp_key, fingerprint=fp,
                                        reply="", route=category,
                                        warnings=(f"qa call failed: {exc}",),
                                        wall_time_s=time.perf_counter() - start))
        return ABSTAIN, ""
    outcome = parse_qa_label(reply.text, item.options)
    trace.entries.append(TraceEntry(stage="knowledge", key=fp_key, fingerprint=fp,
                                    reply=reply.text, strict=outcome.strict,
                                    warnings=outcome.warnings, route=category,
                                    wall_time_s=time.perf_counter() - start,
                                    attempts=reply.attempts, cache_hit=reply.cache_hit))
    return outcome.value, reply.text


@dataclass
class ClientBundle:
    """Everything the pipeline calls out to, already constructed."""

    detection_source: Callable[[Diagram, bytes | None], list[tuple[BBox, float]]]
    naming: Any
    reasoning: Any
    knowledge: Mapping[str, Any]
    descriptors: dict[str, Any] = field(default_factory=dict)


def run_pipeline(dataset: AnnotationFile, bundle: ClientBundle,
                 templates: TemplateSet, parallelism: int = 1,
                 image_root: str | Path | None = None,
                 crop_pad: float = DEFAULT_CROP_PAD,
                 ) -> tuple[list[RecognitionResult], list[DiagramTrace]]:
    """Process every diagram (and the text-only QA bucket) and return
    results in dataset order, independent of scheduling.

    A diagram whose perception hard-fails yields an empty result with an
    error record; the run continues.
    """
    root = Path(image_root) if image_root is not None else Path(".")
    qa_by_diagram: dict[str, list[QAItem]] = {}
    text_only: list[QAItem] = []
    for item in dataset.qa:
        if item.diagram_id is None:
            text_only.append(item)
        else:
            qa_by_diagram.setdefault(item.diagram_id, []).append(item)

    def process(diagram: Diagram) -> tuple[RecognitionResult, DiagramTrace]:
        trace = DiagramTrace(diagram_id=diagram.id)
        raw: dict[str, Any] = {}
        try:
            image_path = root / diagram.image_ref
            with Image.open(image_path) as img:
                image = img.convert("RGB")
            full_png = png_bytes(image)
            boxes = bundle.detection_source(diagram, full_png)
            components, raw_names = run_perception(
                diagram, boxes, bundle.naming, templates, trace,
                crop_pad=crop_pad, image=image, max_workers=parallelism,
            )
            edges, raw_conn = run_reasoning(
                diagram, components, bundle.reasoning, templates, trace,
                image_png=full_png, max_workers=parallelism,
            )
            answers = []
            raw_qa: dict[str, str] = {}
            for item in sorted(qa_by_diagram.get(diagram.id, []), key=lambda q: q.id):
                label, raw_reply = run_knowledge(item, full_png, bundle.knowledge,
                                                 templates, trace)
                answers.append((item.id, label))
                raw_qa[item.id] = raw_reply
            raw = {"name": raw_names, "conn": raw_conn, "qa": raw_qa}
            result = RecognitionResult(
                diagram_id=diagram.id,
                components=tuple(components),
                edges=tuple(edges),
                answers=tuple(answers),
                provenance=dict(bundle.descriptors),
                raw=raw,
            )
        except (ClientError, OSError, ValueError) as exc:
            log.warning("diagram %s failed: %s", diagram.id, exc)
            trace.entries.append(TraceEntry(stage="perception", key="diagram",
                                            fingerprint="", reply="",
                                            warnings=(str(exc),)))
            result = RecognitionResult(diagram_id=diagram.id,
                                       provenance=dict(bundle.descriptors),
                                       error=str(exc))
        return result, trace

    if parallelism <= 1 or len(dataset.diagrams) <= 1:
        processed = [process(d) for d in dataset.diagrams]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            processed = list(pool.map(process, dataset.diagrams))

    results = [r for r, _ in processed]
    traces = [t for _, t in processed]

    if text_only:
        trace = DiagramTrace(diagram_id="")
        answers = []
        raw_qa = {}
        for item in sorted(text_only, key=lambda q: q.id):
            label, raw_reply = run_knowledge(item, None, bundle.knowledge,
                                             templates, trace)
            answers.append((item.id, label))
            raw_qa[item.id] = raw_reply
        results.append(RecognitionResult(diagram_id="", answers=tuple(answers),
                                         provenance=dict(bundle.descriptors),
                                         raw={"qa": raw_qa}))
        traces.append(trace)
    return results, traces
