"""Benchmark scorer: component matching, the S1/S2/S3 subscores, Task-2
accuracy, and the official Task-1/Overall weighting.

Pinned interpretation (recorded here because the benchmark publishes
only the weighting formula):

* S1 matches components one-to-one, greedily by IoU descending, at
  ``iou_threshold`` (default 0.5) with name agreement required by
  default; F1 over matched / unmatched components.
* S2 scores per matched component: true positive iff predicted
  out-degree equals ground-truth out-degree; a matched component with
  the wrong out-degree counts as both FP and FN.
* S3 maps predicted edges through the component match into ground-truth
  index space and takes F1 over directed edge sets; a ground-truth edge
  flagged ``directed=False`` accepts either orientation.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .geometry import iou
from .model import Component, Edge, QAItem, normalize_name  # noqa: F401  (normalize_name is part of this surface)

log = logging.getLogger(__name__)

TASK1_WEIGHTS = (0.4, 0.2, 0.4)
OVERALL_WEIGHTS = (0.6, 0.4)


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int, float], ...]  # (pred index, gt index, iou)
    unmatched_pred: tuple[int, ...]
    unmatched_gt: tuple[int, ...]


@dataclass(frozen=True)
class ScoreCard:
    s1: float
    s2: float
    s3: float
    task1: float
    task2: float
    overall: float

    def __post_init__(self):
        w1, w2, w3 = TASK1_WEIGHTS
        if abs(self.task1 - (w1 * self.s1 + w2 * self.s2 + w3 * self.s3)) > 1e-9:
            raise ValueError("task1 is not the weighted sum of s1/s2/s3")
        wt, wq = OVERALL_WEIGHTS
        if abs(self.overall - (wt * self.task1 + wq * self.task2)) > 1e-9:
            raise ValueError("overall is not the weighted sum of task1/task2")


def _f1(tp: int, fp: int, fn: int) -> float:
    if tp == 0:
        return 1.0 if fp == 0 and fn == 0 else 0.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def match_components(
    pred: Sequence[Component],
    gt: Sequence[Component],
    iou_threshold: float = 0.5,
    require_name: bool = True,
) -> MatchResult:
    """Greedy one-to-one matching over candidate pairs sorted by IoU
    descending. A pair is a candidate iff IoU >= threshold and, when
    ``require_name``, the normalized names are equal and non-empty."""
    candidates = []
    for p in pred:
        pname = normalize_name(p.name)
        for g in gt:
            if require_name:
                if not pname or pname != normalize_name(g.name):
                    continue
            v = iou(p.bbox, g.bbox)
            if v >= iou_threshold:
                candidates.append((v, p.index, g.index))
    candidates.sort(key=lambda t: (-t[0], t[1], t[2]))

    used_p: set[int] = set()
    used_g: set[int] = set()
    pairs = []
    for v, pi, gi in candidates:
        if pi in used_p or gi in used_g:
            continue
        used_p.add(pi)
        used_g.add(gi)
        pairs.append((pi, gi, v))
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_pred=tuple(p.index for p in pred if p.index not in used_p),
        unmatched_gt=tuple(g.index for g in gt if g.index not in used_g),
    )


def s1_f1(m: MatchResult, n_pred: int, n_gt: int) -> float:
    """Detection F1: TP = matched pairs, FP/FN = unmatched components.
    Both sides empty counts as vacuously perfect."""
    tp = len(m.pairs)
    fp = len(m.unmatched_pred)
    fn = len(m.unmatched_gt)
    if tp + fp != n_pred or tp + fn != n_gt:
        raise ValueError("component counts inconsistent with match result")
    return _f1(tp, fp, fn)


def _out_degrees(edges: Iterable[Edge]) -> Counter:
    seen = {(e.src, e.dst) for e in edges}
    deg: Counter = Counter()
    for src, _ in seen:
        deg[src] += 1
    return deg


def s2_f1(pred_edges: Sequence[Edge], gt_edges: Sequence[Edge], m: MatchResult) -> float:
    """Output-count F1: a matched component is TP iff its predicted
    out-degree equals the ground-truth one."""
    pdeg = _out_degrees(pred_edges)
    gdeg = _out_degrees(gt_edges)
    tp = fp = fn = 0
    for pi, gi, _ in m.pairs:
        if pdeg[pi] == gdeg[gi]:
            tp += 1
        else:
            fp += 1
            fn += 1
    fp += len(m.unmatched_pred)
    fn += len(m.unmatched_gt)
    return _f1(tp, fp, fn)


def s3_f1(pred_edges: Sequence[Edge], gt_edges: Sequence[Edge], m: MatchResult) -> float:
    """Connection F1 over directed edge sets in ground-truth index space.

    Predicted edges with an unmatched endpoint are FP. A ground-truth
    edge with ``directed=False`` is consumed by either orientation;
    exact-direction matches are tried first.
    """
    to_gt = {pi: gi for pi, gi, _ in m.pairs}
    pred_set = sorted({(e.src, e.dst) for e in pred_edges})

    gt_remaining: dict[tuple[int, int], bool] = {}
    for e in gt_edges:
        gt_remaining.setdefault((e.src, e.dst), e.directed)

    tp = 0
    fp = 0
    for src, dst in pred_set:
        if src not in to_gt or dst not in to_gt:
            fp += 1
            continue
        key = (to_gt[src], to_gt[dst])
        rkey = (key[1], key[0])
        if key in gt_remaining:
            del gt_remaining[key]
            tp += 1
        elif rkey in gt_remaining and gt_remaining[rkey] is False:
            del gt_remaining[rkey]
            tp += 1
        else:
            fp += 1
    fn = len(gt_remaining)
    return _f1(tp, fp, fn)


def task2_score(predicted: Sequence[tuple[str, str]], gt: Sequence[QAItem]) -> float:
    """Fraction of QA items whose predicted label exactly equals the
    answer label. Missing predictions count as wrong; with no items at
    all the score is vacuously 1. Duplicate predictions for one id keep
    the last one, with a warning."""
    if not gt:
        return 1.0
    known = {q.id for q in gt}
    chosen: dict[str, str] = {}
    for qa_id, label in predicted:
        if qa_id not in known:
            log.warning("prediction for unknown qa id %r skipped", qa_id)
            continue
        if qa_id in chosen:
            log.warning("duplicate prediction for qa id %r; keeping the last one", qa_id)
        chosen[qa_id] = label
    correct = sum(1 for q in gt if chosen.get(q.id) == q.answer)
    return correct / len(gt)


def score_card(s1: float, s2: float, s3: float, task2: float) -> ScoreCard:
    """Combine the four subscores with the official weighting:
    Task-1 = 0.4*S1 + 0.2*S2 + 0.4*S3, Overall = 0.6*Task-1 + 0.4*Task-2."""
    for name, v in (("s1", s1), ("s2", s2), ("s3", s3), ("task2", task2)):
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"{name} must be in [0,1], got {v}")
    w1, w2, w3 = TASK1_WEIGHTS
    task1 = w1 * s1 + w2 * s2 + w3 * s3
    wt, wq = OVERALL_WEIGHTS
    return ScoreCard(s1=s1, s2=s2, s3=s3, task1=task1, task2=task2,
                     overall=wt * task1 + wq * task2)


def mean_scorecards(cards: Sequence[ScoreCard], task2: float | None = None) -> ScoreCard:
    """Aggregate per-diagram cards by arithmetic mean of the subscores.
    ``task2`` overrides the mean when the QA score is computed globally."""
    if not cards:
        raise ValueError("no scorecards to aggregate")
    n = len(cards)
    t2 = task2 if task2 is not None else sum(c.task2 for c in cards) / n
    return score_card(
        sum(c.s1 for c in cards) / n,
        sum(c.s2 for c in cards) / n,
        sum(c.s3 for c in cards) / n,
        t2,
    )
