"""Acceptance suite: one test per exit criterion, each printing a
pass/fail line and enforcing its runtime budget.

The score-formula criterion runs over every fully populated row of the
published results tables. Four of those rows are arithmetically
inconsistent with their own printed subscores (the printed aggregates
were computed from unrounded values, and one Overall cell is a digit
transposition: 0.447 where the subscores give 0.477). Those rows are
marked strict-xfail with the exact deltas so the inconsistency stays
visible; the formula itself is verified by every self-consistent row.
"""

from __future__ import annotations

import json
import random
import string
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from oracles import (
    mc_pass_at_k,
    oracle_crossings,
    oracle_lcs,
    oracle_max_matching_tp,
)
from sysdiag.cli import main, score_predictions
from sysdiag.geometry import count_crossings, iou, row_major_order
from sysdiag.hardsample import pass_at_k
from sysdiag.metrics import score_card
from sysdiag.model import BBox, Component
from sysdiag.parsing import (
    parse_bbox,
    parse_component_names,
    parse_qa_label,
    parse_targets,
)
from sysdiag.rewards import (
    RewardWeights,
    TaskReward,
    lcs_length,
    length_reward,
    reward_conn,
    reward_list,
    reward_loc,
    reward_qa,
    reward_total,
)
from sysdiag.storage import load_annotations, read_predictions, save_annotations


@contextmanager
def criterion(name: str, budget_s: float):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    assert elapsed < budget_s, f"{name} exceeded its {budget_s}s budget ({elapsed:.2f}s)"
    print(f"[acceptance] {name}: PASS ({elapsed:.2f}s < {budget_s:.0f}s)")


# --------------------------------------------------------------- criterion 1
# Published leaderboard rows: (s1, s2, s3, task2, printed_task1, printed_overall).
# Rows flagged inconsistent cannot reproduce at +/-0.0005 from their own
# rounded subscores; the delta is part of the xfail reason.

ROWS = [
    ("t1-workflow-3b", 0.988, 0.828, 0.735, 0.395, 0.855, 0.671, None),
    ("t1-eda-elite-winner", 0.984, 0.787, 0.777, 0.370, 0.862, 0.665, None),
    ("t1-qwen2.5-vl-3b-e2e", 0.111, 0.038, 0.014, 0.360, 0.058, 0.179, None),
    ("t1-hint-grpo-e2e", 0.153, 0.062, 0.025, 0.355, 0.083, 0.192,
     "printed Task-1 0.083 vs computed 0.0836 (delta 0.0006)"),
    ("t1-gemini-2.5-pro-e2e", 0.008, 0.005, 0.008, 0.685, 0.007, 0.278, None),
    ("t1-gpt-5-e2e", 0.085, 0.068, 0.029, 0.730, 0.059, 0.327,
     "printed Overall 0.327 vs computed 0.32752 (delta 0.00052)"),
    ("t1-claude-sonnet-4-e2e", 0.477, 0.337, 0.265, 0.445, 0.364, 0.397, None),
    ("t2-workflow-3b", 0.988, 0.828, 0.735, 0.395, 0.855, 0.671, None),
    ("t2-qwen2.5-vl-3b", 0.988, 0.375, 0.203, 0.365, 0.552, 0.447,
     "printed Task-1 0.552 vs computed 0.5514 (delta 0.0006); printed Overall "
     "0.447 is a digit transposition of computed 0.477"),
    ("t2-hint-grpo", 0.988, 0.454, 0.258, 0.355, 0.589, 0.496, None),
    ("t2-gemini-2.5-pro", 0.986, 0.870, 0.832, 0.685, 0.901, 0.815, None),
    ("t2-gpt-5", 0.986, 0.582, 0.555, 0.705, 0.733, 0.722, None),
    ("t2-claude-sonnet-4", 0.986, 0.486, 0.314, 0.450, 0.618, 0.551,
     "printed Task-1 0.618 vs computed 0.6172 (delta 0.0008); printed Overall "
     "0.551 vs computed 0.55032 (delta 0.00068)"),
    ("t3-base", 0.988, 0.375, 0.203, 0.365, 0.552, 0.447,
     "same cells as t2-qwen2.5-vl-3b including the 0.447/0.477 transposition"),
    ("t3-plus-pretrain", 0.988, 0.454, 0.258, 0.355, 0.589, 0.496, None),
    ("t3-plus-sft", 0.988, 0.736, 0.594, 0.355, 0.780, 0.610, None),
    ("t3-plus-rl", 0.988, 0.807, 0.725, 0.355, 0.847, 0.650, None),
    ("t3-plus-lora", 0.988, 0.828, 0.735, 0.395, 0.855, 0.671, None),
]

ROW_PARAMS = [
    pytest.param(row, id=row[0],
                 marks=() if row[7] is None else
                 pytest.mark.xfail(strict=True, reason=row[7]))
    for row in ROWS
]


@pytest.mark.parametrize("row", ROW_PARAMS)
def test_scorecard_reproduces_published_row(row):
    name, s1, s2, s3, t2, task1, overall, _ = row
    card = score_card(s1, s2, s3, t2)
    assert abs(card.task1 - task1) <= 5e-4, \
        f"{name}: task1 {card.task1:.5f} vs printed {task1}"
    assert abs(card.overall - overall) <= 5e-4, \
        f"{name}: overall {card.overall:.5f} vs printed {overall}"


def test_criterion_score_formula_reproduction():
    with criterion("score-formula reproduction", budget_s=1.0):
        consistent = [r for r in ROWS if r[7] is None]
        for name, s1, s2, s3, t2, task1, overall, _ in consistent:
            card = score_card(s1, s2, s3, t2)
            assert abs(card.task1 - task1) <= 5e-4
            assert abs(card.overall - overall) <= 5e-4
        # Row with no Task-2 column: Task-1 still reproduces.
        card = score_card(0.986, 0.239, 0.150, 0.0)
        assert abs(card.task1 - 0.502) <= 5e-4
        inconsistent = len(ROWS) - len(consistent)
        print(f"[acceptance] note: {len(consistent)} rows reproduce at +/-0.0005; "
              f"{inconsistent} published rows are arithmetically inconsistent with "
              f"their own rounded subscores and are tracked as strict xfails")


# --------------------------------------------------------------- criterion 2

def test_criterion_end_to_end_identity(corpus, tmp_path):
    with criterion("end-to-end identity", budget_s=5.0):
        out1 = tmp_path / "p1"
        out8 = tmp_path / "p8"
        assert main(["run", "--config", str(corpus.run_config),
                     "--out", str(out1), "--parallelism", "1"]) == 0
        assert main(["run", "--config", str(corpus.run_config),
                     "--out", str(out8), "--parallelism", "8"]) == 0
        b1 = (out1 / "predictions.jsonl").read_bytes()
        b8 = (out8 / "predictions.jsonl").read_bytes()
        assert b1 == b8, "prediction files differ across parallelism"

        results = read_predictions(out1 / "predictions.jsonl")
        _, aggregate, warnings = score_predictions(results, corpus.dataset)
        assert warnings == []
        assert (aggregate.s1, aggregate.s2, aggregate.s3, aggregate.task2) == \
            (1.0, 1.0, 1.0, 1.0)
        assert aggregate.overall == 1.0


# --------------------------------------------------------------- criterion 3

def test_criterion_reward_suite():
    with criterion("reward suite", budget_s=10.0):
        rng = random.Random(314)

        # Worked examples.
        assert reward_loc(BBox(0, 0, 0.5, 0.5), BBox(0.25, 0.25, 0.5, 0.5)) == \
            pytest.approx(1 / 7, abs=1e-12)
        assert length_reward(2, 4) == 0.5
        assert length_reward(0, 0) == 1.0
        assert reward_conn({2, 3}, {2, 4}, RewardWeights(alpha=0.7)) == \
            pytest.approx(0.65)
        assert reward_conn(set(), {1}) == 0.0
        equal_betas = RewardWeights(betas=(1 / 3, 1 / 3, 1 / 3))
        assert reward_list(["c", "b", "a"], ["a", "b", "c"], equal_betas) == \
            pytest.approx(7 / 9)
        assert reward_qa("B", "B") == 1 and reward_qa("b", "B") == 0
        assert reward_qa(" C ", "C") == 1
        w_half = RewardWeights(lambda_fmt=0.5, lambda_acc=0.5)
        all_tasks = {t: TaskReward(1, 1.0) for t in ("loc", "conn", "qa", "list")}
        assert reward_total(all_tasks, w_half) == pytest.approx(4.0)

        # Range + perfection-iff-equality properties.
        universe = list(range(1, 10))
        for _ in range(400):
            p = set(rng.sample(universe, rng.randint(0, 6)))
            g = set(rng.sample(universe, rng.randint(1, 6)))
            v = reward_conn(p, g)
            assert 0.0 <= v <= 1.0 + 1e-12
            assert (abs(v - 1.0) < 1e-12) == (p == g)
        names = ["x", "y", "z", "w"]
        for _ in range(400):
            a = [rng.choice(names) for _ in range(rng.randint(0, 6))]
            b = [rng.choice(names) for _ in range(rng.randint(1, 6))]
            v = reward_list(a, b)
            assert 0.0 <= v <= 1.0 + 1e-12
            assert (abs(v - 1.0) < 1e-12) == (a == b)

        # Monotone in F1 at fixed counts.
        g = {1, 2, 3, 4}
        scores = [reward_conn(p, g) for p in
                  ({5, 6, 7, 8}, {1, 6, 7, 8}, {1, 2, 7, 8}, {1, 2, 3, 8}, g)]
        assert scores == sorted(scores)

        # Beta-sum and negative-lambda guards.
        with pytest.raises(ValueError):
            RewardWeights(betas=(0.5, 0.4, 0.3))
        with pytest.raises(ValueError):
            RewardWeights(lambda_acc={"qa": -1.0})

        # LCS against the memoized oracle: 1,000 random pairs, zero mismatches.
        alphabet = [f"n{i}" for i in range(5)]
        mismatches = 0
        for _ in range(1000):
            a = [rng.choice(alphabet) for _ in range(rng.randint(0, 20))]
            b = [rng.choice(alphabet) for _ in range(rng.randint(0, 20))]
            if lcs_length(a, b) != oracle_lcs(a, b):
                mismatches += 1
        assert mismatches == 0


# --------------------------------------------------------------- criterion 4

def test_criterion_matching_oracle():
    with criterion("matching oracle", budget_s=30.0):
        from tests_support_matching import random_detection_instance
        rng = random.Random(20_25)
        from sysdiag.metrics import match_components
        for _ in range(200):
            gt, pred = random_detection_instance(rng, max_components=8)
            m = match_components(pred, gt, iou_threshold=0.5, require_name=True)
            best = oracle_max_matching_tp(pred, gt, 0.5, True)
            assert len(m.pairs) == best, "greedy matching lost to brute force"


# --------------------------------------------------------------- criterion 5

def test_criterion_pass_at_k():
    with criterion("pass@k", budget_s=20.0):
        assert pass_at_k(4, 2, 2) == pytest.approx(5 / 6, abs=1e-12)
        rng = np.random.default_rng(7)
        for n in range(1, 11):
            for c in range(n + 1):
                mc = mc_pass_at_k(n, c, trials=100_000, rng=rng)
                for k in range(1, n + 1):
                    analytic = pass_at_k(n, c, k)
                    assert abs(analytic - mc[k - 1]) < 0.01, (n, c, k)


# --------------------------------------------------------------- criterion 6

def test_criterion_geometry(corpus):
    with criterion("geometry", budget_s=20.0):
        rng = random.Random(61)

        def rand_box() -> BBox:
            x = rng.randrange(0, 100) / 128
            y = rng.randrange(0, 100) / 128
            w = rng.randrange(1, 128 - int(x * 128)) / 128
            h = rng.randrange(1, 128 - int(y * 128)) / 128
            return BBox(x, y, w, h)

        for _ in range(10_000):
            a, b = rand_box(), rand_box()
            v = iou(a, b)
            assert v == iou(b, a)
            assert 0.0 <= v <= 1.0
            assert iou(a, a) == 1.0

        for _ in range(1000):
            n = rng.randint(1, 10)
            comps = [
                Component(i + 1, f"C{i}", BBox(
                    rng.randrange(8, 100) / 128, rng.randrange(8, 100) / 128,
                    rng.randrange(4, 16) / 128, rng.randrange(4, 16) / 128))
                for i in range(n)
            ]
            base = row_major_order(comps)
            moved = [Component(c.index, c.name, BBox(
                c.bbox.x * 0.5 + 0.25, c.bbox.y * 0.5 + 0.125,
                c.bbox.w * 0.5, c.bbox.h * 0.5)) for c in comps]
            assert row_major_order(moved) == base
            assert sorted(base) == list(range(1, n + 1))

        for d in corpus.dataset.diagrams:
            assert count_crossings(d) == oracle_crossings(d)


# --------------------------------------------------------------- criterion 7

GOLDEN_CORPUS = [
    '["PLL","ADC"]', "1. PLL\n2. ADC", "[]", "[3, 5]", '["DSP"]', "B", "C",
    "[0.1, 0.2, 0.3, 0.4]", "The parts are PLL and ADC.", "no idea",
    "```json\n[2]\n```", "3: DSP\n6: NOC", "- PLL\n- ADC", "Answer: C",
    "[1, 3]", "therefore the answer is C.", "", "   ", "{\"a\": 1}",
]


def test_criterion_parser_fuzz(corpus, tmp_path):
    with criterion("parser fuzz", budget_s=30.0):
        vocab = [Component(1, "PLL", BBox(0.05, 0.05, 0.2, 0.1)),
                 Component(2, "ADC", BBox(0.45, 0.05, 0.2, 0.1)),
                 Component(3, "DSP", BBox(0.05, 0.45, 0.2, 0.1))]
        options = [("A", "x"), ("B", "y"), ("C", "z"), ("D", "w")]
        rng = random.Random(1729)
        pool = string.printable + "\u00e9\u4e2d\ufffd" + chr(0)
        for _ in range(10_000):
            n = rng.randint(0, 80)
            text = "".join(rng.choice(pool) for _ in range(n))
            parse_component_names(text)
            parse_targets(text, vocab, source_index=1)
            parse_qa_label(text, options)
            parse_bbox(text)

        for text in GOLDEN_CORPUS:
            for parse, args in (
                (parse_component_names, ()),
                (parse_targets, (vocab,)),
                (parse_qa_label, (options,)),
                (parse_bbox, ()),
            ):
                full = parse(text, *args)
                if full.strict:
                    strict_only = parse(text, *args, lenient=False)
                    assert strict_only.value == full.value

        # Canonical round-trip: save(load(x)) is byte-stable.
        p1 = tmp_path / "rt1.json"
        p2 = tmp_path / "rt2.json"
        save_annotations(load_annotations(corpus.annotations), p1)
        save_annotations(load_annotations(p1), p2)
        assert p1.read_bytes() == corpus.annotations.read_bytes()
        assert p1.read_bytes() == p2.read_bytes()


# --------------------------------------------------------------- criterion 8

def test_criterion_non_reproducibility_note():
    with criterion("non-reproducibility note", budget_s=1.0):
        readme = (Path(__file__).resolve().parents[1] / "README.md").read_text(
            encoding="utf-8").lower()
        assert "not reproduced" in readme
        assert "scripted" in readme
