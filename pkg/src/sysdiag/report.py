"""Score/reward report rendering in JSON, CSV, and markdown.

Rows are ordered by (method, diagram id) with aggregate rows first, all
values rounded half-up to 3 decimals, and the three formats carry
identical values so downstream diffs never depend on the format flag.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

from .metrics import ScoreCard
from .rewards import RewardBreakdown, TASKS

FORMATS = ("json", "csv", "md")
AGGREGATE = ""  # diagram id used for aggregate rows; sorts first

_SCORE_COLUMNS = ("s1", "s2", "s3", "task1", "task2", "overall")


@dataclass(frozen=True)
class ScoreRow:
    method: str
    card: ScoreCard
    diagram_id: str = AGGREGATE
    warnings: tuple[str, ...] = field(default=(), compare=False)


def round3(value: float) -> float:
    return float(Decimal(repr(value)).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def _fmt(value: float) -> str:
    return f"{round3(value):.3f}"


def _sorted_rows(rows: Sequence[ScoreRow]) -> list[ScoreRow]:
    return sorted(rows, key=lambda r: (r.method, r.diagram_id))


def _score_record(row: ScoreRow) -> dict:
    rec = {"method": row.method, "diagram": row.diagram_id or "aggregate"}
    for col in _SCORE_COLUMNS:
        rec[col] = round3(getattr(row.card, col))
    return rec


def _reward_record(b: RewardBreakdown) -> dict:
    rec: dict = {"sample": b.sample_id}
    for task in TASKS:
        r = b.tasks.get(task)
        rec[f"{task}_fmt"] = r.r_fmt if r else None
        rec[f"{task}_acc"] = round3(r.r_acc) if r else None
    rec["total"] = round3(b.total)
    return rec


def emit_report(scorecards: Sequence[ScoreRow],
                rewards: Sequence[RewardBreakdown] = (),
                fmt: str = "json") -> str:
    if not scorecards:
        raise ValueError("emit_report needs at least one scorecard")
    if fmt not in FORMATS:
        raise ValueError(f"unknown report format {fmt!r}; expected one of {FORMATS}")
    rows = _sorted_rows(scorecards)
    reward_rows = sorted(rewards, key=lambda b: b.sample_id)

    if fmt == "json":
        doc: dict = {"scores": [_score_record(r) for r in rows]}
        if reward_rows:
            doc["rewards"] = [_reward_record(b) for b in reward_rows]
        return json.dumps(doc, indent=2) + "\n"

    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "diagram", *_SCORE_COLUMNS])
        for row in rows:
            rec = _score_record(row)
            writer.writerow([rec["method"], rec["diagram"],
                             *(_fmt(getattr(row.card, c)) for c in _SCORE_COLUMNS)])
        if reward_rows:
            writer.writerow([])
            header = ["sample"]
            for task in TASKS:
                header += [f"{task}_fmt", f"{task}_acc"]
            writer.writerow(header + ["total"])
            for b in reward_rows:
                rec = _reward_record(b)
                writer.writerow([
                    rec["sample"],
                    *(("" if rec[k] is None else rec[k]) for k in header[1:]),
                    _fmt(b.total),
                ])
        return buf.getvalue()

    lines = ["| Method | Diagram | S1 | S2 | S3 | Task1 | Task2 | Overall |",
             "| --- | --- | --- | --- | --- | --- | --- | --- |"]
    for row in rows:
        cells = [row.method, row.diagram_id or "aggregate",
                 *(_fmt(getattr(row.card, c)) for c in _SCORE_COLUMNS)]
        lines.append("| " + " | ".join(cells) + " |")
    if reward_rows:
        lines.append("")
        header = ["Sample"]
        for task in TASKS:
            header += [f"{task} fmt", f"{task} acc"]
        header.append("Total")
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + " --- |" * len(header))
        for b in reward_rows:
            rec = _reward_record(b)
            cells = [rec["sample"]]
            for task in TASKS:
                cells.append("" if rec[f"{task}_fmt"] is None else str(rec[f"{task}_fmt"]))
                cells.append("" if rec[f"{task}_acc"] is None else f"{rec[f'{task}_acc']:.3f}")
            cells.append(_fmt(b.total))
            lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
