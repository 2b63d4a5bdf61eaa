from __future__ import annotations

import json

import pytest

from sysdiag.metrics import score_card
from sysdiag.report import AGGREGATE, ScoreRow, emit_report, round3
from sysdiag.rewards import RewardWeights, TaskReward, breakdown


def rows():
    return [
        ScoreRow(method="run", card=score_card(0.988, 0.828, 0.735, 0.395),
                 diagram_id="d2"),
        ScoreRow(method="run", card=score_card(1, 1, 1, 1), diagram_id="d1"),
        ScoreRow(method="run", card=score_card(0.5, 0.5, 0.5, 0.5),
                 diagram_id=AGGREGATE),
    ]


class TestRounding:
    @pytest.mark.parametrize("value, expected", [
        (0.8545, 0.855),   # half-up, not banker's
        (0.8544, 0.854),
        (0.6705, 0.671),
        (0.0005, 0.001),
        (1.0, 1.0),
    ])
    def test_half_up_to_three_decimals(self, value, expected):
        assert round3(value) == expected


class TestEmitReport:
    def test_known_row_renders_855_and_671(self):
        text = emit_report(rows(), fmt="md")
        line = next(l for l in text.splitlines() if "| d2 |" in l)
        assert "| 0.855 |" in line and "| 0.671 |" in line

    def test_aggregate_sorts_first_then_diagram_ids(self):
        doc = json.loads(emit_report(rows(), fmt="json"))
        assert [r["diagram"] for r in doc["scores"]] == ["aggregate", "d1", "d2"]

    def test_empty_reward_section_omitted(self):
        doc = json.loads(emit_report(rows(), rewards=(), fmt="json"))
        assert "rewards" not in doc
        md = emit_report(rows(), rewards=(), fmt="md")
        assert "fmt" not in md
        csv_text = emit_report(rows(), rewards=(), fmt="csv")
        assert "total" not in csv_text

    def test_reward_section_rendered_when_present(self):
        b = breakdown("d1", {"qa": TaskReward(1, 1.0)}, RewardWeights())
        doc = json.loads(emit_report(rows(), rewards=[b], fmt="json"))
        assert doc["rewards"][0]["sample"] == "d1"
        assert doc["rewards"][0]["qa_acc"] == 1.0
        assert doc["rewards"][0]["loc_acc"] is None

    def test_formats_carry_identical_values(self):
        doc = json.loads(emit_report(rows(), fmt="json"))
        csv_lines = emit_report(rows(), fmt="csv").strip().splitlines()
        header = csv_lines[0].split(",")
        for rec, line in zip(doc["scores"], csv_lines[1:]):
            cells = dict(zip(header, line.split(",")))
            for col in ("s1", "s2", "s3", "task1", "task2", "overall"):
                assert float(cells[col]) == rec[col]

    def test_no_scorecards_rejected(self):
        with pytest.raises(ValueError):
            emit_report([], fmt="json")

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError):
            emit_report(rows(), fmt="xml")
