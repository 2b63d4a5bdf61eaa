"""Deterministic fixture corpora: synthetic block-diagram images with
full annotations, a matching detections file, and scripted chat replies
that reproduce the ground truth exactly.

Everything flows from one seed, so two generations with the same seed
are byte-identical; the scripted replies are keyed by the same turn
fingerprints the pipeline computes, which makes identity runs (scores
of exactly 1.0) the standard end-to-end check.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from PIL import Image, ImageDraw

from .client import turn_fingerprint
from .geometry import reorder_row_major
from .model import BBox, Component, Diagram, Edge, QAItem
from .pipeline import (
    TemplateSet,
    crop_region,
    default_templates,
    naming_turn,
    qa_turn,
    reasoning_turn,
    png_bytes,
)
from .storage import AnnotationFile, save_annotations, save_detections

NAME_POOL = [
    "PLL", "ADC", "DAC", "CPU", "DSP", "SRAM", "DMA", "UART", "SPI", "I2C",
    "MUX", "FIFO", "LDO", "PMU", "NOC", "MAC", "PHY", "CRC", "ALU", "ROM",
]

IMG_W, IMG_H = 800, 600


def _draw_diagram(diagram: Diagram) -> Image.Image:
    img = Image.new("RGB", (diagram.width_px, diagram.height_px), "white")
    draw = ImageDraw.Draw(img)
    centers = {c.index: c.bbox.center for c in diagram.components}
    for e in diagram.edges:
        (x1, y1), (x2, y2) = centers[e.src], centers[e.dst]
        draw.line(
            [(x1 * diagram.width_px, y1 * diagram.height_px),
             (x2 * diagram.width_px, y2 * diagram.height_px)],
            fill="black", width=2,
        )
    for c in diagram.components:
        x0 = c.bbox.x * diagram.width_px
        y0 = c.bbox.y * diagram.height_px
        x1 = c.bbox.x2 * diagram.width_px
        y1 = c.bbox.y2 * diagram.height_px
        draw.rectangle([x0, y0, x1, y1], fill="#e8e8e8", outline="black", width=2)
        draw.text((x0 + 6, y0 + 6), c.name, fill="black")
    return img


def _make_diagram(rng: random.Random, did: str, n_components: int) -> Diagram:
    # Grid placement with jittered sizes keeps boxes disjoint and crops unique.
    cols = 3
    rows = (n_components + cols - 1) // cols
    cells = [(r, c) for r in range(rows) for c in range(cols)][:n_components]
    components = []
    for i, (r, c) in enumerate(cells, start=1):
        cell_w, cell_h = 1.0 / cols, 1.0 / max(rows, 2)
        w = round(cell_w * rng.uniform(0.45, 0.6), 4)
        h = round(cell_h * rng.uniform(0.35, 0.5), 4)
        x = round(c * cell_w + cell_w * rng.uniform(0.08, 0.2), 4)
        y = round(r * cell_h + cell_h * rng.uniform(0.08, 0.2), 4)
        name = rng.choice(NAME_POOL)
        components.append(Component(index=i, name=name, bbox=BBox(x, y, w, h)))
    components = reorder_row_major(components)

    edges = []
    seen = set()
    for c in components:
        fan_out = rng.randint(0, min(3, len(components) - 1))
        targets = rng.sample([o.index for o in components if o.index != c.index], fan_out)
        for t in targets:
            if (c.index, t) not in seen:
                seen.add((c.index, t))
                edges.append(Edge(src=c.index, dst=t))
    return Diagram(id=did, image_ref=f"images/{did}.png", width_px=IMG_W,
                   height_px=IMG_H, components=tuple(components), edges=tuple(edges))


def _make_qa(rng: random.Random, diagrams: list[Diagram]) -> list[QAItem]:
    items = []
    for d in diagrams:
        hub = max(
            {e.src for e in d.edges} or {d.components[0].index},
            key=lambda i: sum(1 for e in d.edges if e.src == i),
        )
        hub_name = d.component_by_index()[hub].name
        distractors = rng.sample([c.name for c in d.components if c.index != hub],
                                 min(3, len(d.components) - 1))
        labels = ["A", "B", "C", "D"][: len(distractors) + 1]
        names = [hub_name] + distractors
        order = rng.sample(range(len(names)), len(names))
        options = tuple((labels[pos], names[i]) for pos, i in enumerate(order))
        answer = next(label for label, text in options if text == hub_name)
        items.append(QAItem(
            id=f"{d.id}-q1",
            diagram_id=d.id,
            question="Which component drives the most downstream blocks in this diagram?",
            options=options,
            answer=answer,
        ))
    items.append(QAItem(
        id="tq-1", diagram_id=None,
        question="A phase-locked loop primarily keeps which two signals aligned?",
        options=(("A", "An input reference and a local oscillator"),
                 ("B", "Two independent power rails"),
                 ("C", "A DAC output and an antenna"),
                 ("D", "Two unrelated clock domains")),
        answer="A",
    ))
    items.append(QAItem(
        id="tq-2", diagram_id=None,
        question="Increasing fan-out on a bus primarily increases what?",
        options=(("A", "Supply voltage"), ("B", "Capacitive load"),
                 ("C", "Oscillator frequency"), ("D", "Die temperature only")),
        answer="B",
    ))
    return items


def build_identity_scripts(dataset: AnnotationFile, image_root: Path,
                           templates: TemplateSet | None = None,
                           crop_pad: float = 0.10) -> dict[str, dict[str, str]]:
    """Scripted replies that echo the ground truth, keyed by the same
    turn fingerprints the pipeline will compute."""
    templates = templates or default_templates()
    naming: dict[str, str] = {}
    reasoning: dict[str, str] = {}
    knowledge: dict[str, str] = {}

    for d in dataset.diagrams:
        with Image.open(image_root / d.image_ref) as img:
            image = img.convert("RGB")
        full_png = png_bytes(image)
        targets_by_src: dict[int, list[int]] = {}
        for e in d.edges:
            targets_by_src.setdefault(e.src, []).append(e.dst)
        for c in d.components:
            turn = naming_turn(templates, crop_region(image, c.bbox, pad=crop_pad))
            naming[turn_fingerprint(turn)] = c.name
            conn_turn = reasoning_turn(templates, d.components, c, full_png)
            reasoning[turn_fingerprint(conn_turn)] = json.dumps(
                sorted(targets_by_src.get(c.index, []))
            )
        for item in dataset.qa:
            if item.diagram_id == d.id:
                turn = qa_turn(templates, item, full_png)
                knowledge[turn_fingerprint(turn)] = item.answer
    for item in dataset.qa:
        if item.diagram_id is None:
            turn = qa_turn(templates, item, None)
            knowledge[turn_fingerprint(turn)] = item.answer
    return {"naming": naming, "reasoning": reasoning, "knowledge": knowledge}


def make_fixture_set(out_dir: str | Path, seed: int = 0, n_diagrams: int = 5) -> Path:
    """Write a complete fixture corpus under ``out_dir``; returns the
    annotation file path.

    Layout: annotations.json, detections.json, images/, scripts/
    (scripted replies for the three chat roles), and run_config.json
    wired for an identity run into ``out/``.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "scripts").mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)

    diagrams = []
    for i in range(n_diagrams):
        d = _make_diagram(rng, f"d{i + 1}", n_components=rng.randint(3, 7))
        _draw_diagram(d).save(out / d.image_ref)
        diagrams.append(d)
    dataset = AnnotationFile(diagrams=tuple(diagrams), qa=tuple(_make_qa(rng, diagrams)))
    save_annotations(dataset, out / "annotations.json")
    save_detections(
        {d.id: [(c.bbox, 1.0) for c in d.components] for d in diagrams},
        out / "detections.json",
    )

    scripts = build_identity_scripts(dataset, out)
    for role, script in scripts.items():
        (out / "scripts" / f"{role}.json").write_text(
            json.dumps({"script": script, "default": None, "strict": True},
                       indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    config = {
        "dataset": "annotations.json",
        "detections": "detections.json",
        "endpoints": {
            "naming": {"kind": "scripted", "script": "scripts/naming.json"},
            "reasoning": {"kind": "scripted", "script": "scripts/reasoning.json"},
            "knowledge": {
                "image": {"kind": "scripted", "script": "scripts/knowledge.json"},
                "text_only": {"kind": "scripted", "script": "scripts/knowledge.json"},
            },
        },
        "metrics": {"iou_threshold": 0.5, "require_name": True},
        "reward_weights": {
            "alpha": 0.7,
            "betas": [0.5, 0.2, 0.3],
            "lambda_fmt": 0.1,
            "lambda_acc": 0.9,
            "provenance": "artifact default, not a published benchmark value",
        },
        "parallelism": 1,
        "out_dir": "out",
        "seed": seed,
    }
    (out / "run_config.json").write_text(json.dumps(config, indent=2) + "\n",
                                         encoding="utf-8")
    return out / "annotations.json"
