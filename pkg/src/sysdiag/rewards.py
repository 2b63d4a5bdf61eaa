"""Compound reward library for scoring rollouts and auditing prediction
logs.

Per-task accuracy rewards:

* loc:  IoU of predicted vs ground-truth box.
* conn: alpha * set-F1(P, G) + (1 - alpha) * length reward.
* list: beta1 * multiset-F1 + beta2 * length reward + beta3 * LCS ratio
        (the LCS term rewards keeping row-major order).
* qa:   exact label match.

The total combines per-task format validity and accuracy:
``sum_t lambda_fmt[t] * r_fmt + lambda_acc[t] * r_acc``.

Default weights (alpha=0.7, beta=(0.5, 0.2, 0.3), lambda_fmt=0.1,
lambda_acc=0.9) are artifact defaults, not published benchmark values;
any reward-weighted result should be labeled with the active weights.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .model import BBox, normalize_name
from .geometry import iou
from . import parsing

TASKS = ("loc", "conn", "qa", "list")


def _as_task_weights(value, default: float) -> dict[str, float]:
    if value is None:
        return {t: default for t in TASKS}
    if isinstance(value, (int, float)):
        return {t: float(value) for t in TASKS}
    out = {t: default for t in TASKS}
    for t, v in value.items():
        if t not in TASKS:
            raise ValueError(f"unknown reward task {t!r}")
        out[t] = float(v)
    return out


@dataclass(frozen=True)
class RewardWeights:
    alpha: float = 0.7
    betas: tuple[float, float, float] = (0.5, 0.2, 0.3)
    lambda_fmt: Mapping[str, float] | float | None = None
    lambda_acc: Mapping[str, float] | float | None = None

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must be in [0,1], got {self.alpha}")
        if len(self.betas) != 3 or any(b < 0 for b in self.betas):
            raise ValueError("betas must be three nonnegative ratios")
        if abs(sum(self.betas) - 1.0) > 1e-9:
            raise ValueError(f"betas must sum to 1, got {sum(self.betas)}")
        object.__setattr__(self, "lambda_fmt", _as_task_weights(self.lambda_fmt, 0.1))
        object.__setattr__(self, "lambda_acc", _as_task_weights(self.lambda_acc, 0.9))
        for name in ("lambda_fmt", "lambda_acc"):
            for t, v in getattr(self, name).items():
                if v < 0:
                    raise ValueError(f"{name}[{t}] must be nonnegative, got {v}")


@dataclass(frozen=True)
class TaskReward:
    r_fmt: int  # 0 or 1
    r_acc: float  # in [0, 1]


@dataclass(frozen=True)
class RewardBreakdown:
    sample_id: str
    tasks: Mapping[str, TaskReward]
    total: float
    weights: RewardWeights = field(compare=False, default_factory=RewardWeights)


def reward_loc(pred: BBox, gt: BBox) -> float:
    return iou(pred, gt)


def length_reward(p_count: int, g_count: int) -> float:
    """1 - |p - g| / max(p, g, 1): maximized exactly at count equality."""
    if p_count < 0 or g_count < 0:
        raise ValueError("counts must be nonnegative")
    return 1.0 - abs(p_count - g_count) / max(p_count, g_count, 1)


def _set_f1(p: set, g: set) -> float:
    if not p and not g:
        return 1.0
    tp = len(p & g)
    if tp == 0:
        return 0.0
    return 2.0 * tp / (len(p) + len(g))


def _multiset_f1(a: Sequence[str], b: Sequence[str]) -> float:
    if not a and not b:
        return 1.0
    ca, cb = Counter(a), Counter(b)
    tp = sum(min(ca[k], cb[k]) for k in ca)
    if tp == 0:
        return 0.0
    return 2.0 * tp / (len(a) + len(b))


def reward_conn(p_targets: Iterable[int], g_targets: Iterable[int],
                w: RewardWeights = RewardWeights()) -> float:
    """alpha * F1 over target sets + (1 - alpha) * length reward."""
    p, g = set(p_targets), set(g_targets)
    return w.alpha * _set_f1(p, g) + (1.0 - w.alpha) * length_reward(len(p), len(g))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length over normalized names."""
    xs = [normalize_name(s) for s in a]
    ys = [normalize_name(s) for s in b]
    if not xs or not ys:
        return 0
    prev = [0] * (len(ys) + 1)
    for x in xs:
        curr = [0]
        for j, y in enumerate(ys, start=1):
            if x == y:
                curr.append(prev[j - 1] + 1)
            else:
                curr.append(max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def reward_list(pred: Sequence[str], gt: Sequence[str],
                w: RewardWeights = RewardWeights()) -> float:
    """Listing reward over name sequences (compared after normalization)."""
    a = [normalize_name(s) for s in pred]
    b = [normalize_name(s) for s in gt]
    b1, b2, b3 = w.betas
    lcs_term = lcs_length(pred, gt) / max(len(a), len(b), 1)
    return b1 * _multiset_f1(a, b) + b2 * length_reward(len(a), len(b)) + b3 * lcs_term


def reward_qa(pred_label: str, gt_label: str) -> int:
    """Exact, case-sensitive label match after trimming whitespace."""
    return int(pred_label.strip() == gt_label.strip())


def reward_format(raw_model_text: str, task: str, *,
                  vocabulary=None, options=None, source_index: int | None = None) -> int:
    """1 iff the task's strict parser accepts the text without fallback."""
    if task == "list":
        outcome = parsing.parse_component_names(raw_model_text, lenient=False)
    elif task == "conn":
        if vocabulary is None:
            raise ValueError("conn format reward needs the component vocabulary")
        outcome = parsing.parse_targets(raw_model_text, vocabulary,
                                        source_index=source_index, lenient=False)
    elif task == "qa":
        if options is None:
            raise ValueError("qa format reward needs the option list")
        outcome = parsing.parse_qa_label(raw_model_text, options, lenient=False)
    elif task == "loc":
        outcome = parsing.parse_bbox(raw_model_text, lenient=False)
    else:
        raise ValueError(f"unknown reward task {task!r}")
    return int(outcome.strict)


def reward_total(tasks: Mapping[str, TaskReward], w: RewardWeights = RewardWeights()) -> float:
    """Weighted sum over the tasks present; absent tasks contribute 0."""
    total = 0.0
    for t, r in tasks.items():
        if t not in TASKS:
            raise ValueError(f"unknown reward task {t!r}")
        total += w.lambda_fmt[t] * r.r_fmt + w.lambda_acc[t] * r.r_acc
    return total


def breakdown(sample_id: str, tasks: Mapping[str, TaskReward],
              w: RewardWeights = RewardWeights()) -> RewardBreakdown:
    return RewardBreakdown(sample_id=sample_id, tasks=dict(tasks),
                           total=reward_total(tasks, w), weights=w)
