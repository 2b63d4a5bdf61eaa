"""Hard-sample mining: rank dataset samples by inference instability
across repeated runs and by connectivity density.

The miner consumes prediction logs from N repeated runs; it never calls
models itself. Defaults (n runs >= 2, k = 2, success threshold = 0.5,
fan normalizer F = 6, crossing normalizer X = 10, instability weight
0.5, ambiguity bonus 0.1) are artifact defaults recorded in the run
config, not published values.

Visual ambiguity is human-judged: a sample contributes the ambiguity
bonus only when its annotation record carries an explicit truthy
"ambiguous" flag; nothing is ever inferred from pixels.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .geometry import count_crossings
from .model import Diagram

FAN_NORMALIZER = 6
CROSSING_NORMALIZER = 10
DEFAULT_K = 2
DEFAULT_SUCCESS_THRESHOLD = 0.5
DEFAULT_INSTABILITY_WEIGHT = 0.5
DEFAULT_AMBIGUITY_BONUS = 0.1

# Variance of scores in [0,1] is at most 1/4; that caps the normalizer.
_MAX_VARIANCE = 0.25


@dataclass(frozen=True)
class SampleStats:
    sample_id: str
    run_scores: tuple[float, ...]
    pass_at_k: float
    score_variance: float
    instability: float
    max_fan_out: int
    max_fan_in: int
    crossing_count: int
    density: float
    ambiguous: bool = False
    hardness: float = 0.0


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimate of P(at least one success in k draws) from n
    attempts with c successes: 1 - C(n-c, k) / C(n, k)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0 <= c <= n):
        raise ValueError("c must be in 0..n")
    if not (1 <= k <= n):
        raise ValueError("k must be in 1..n")
    if n - c < k:
        return 1.0
    return 1.0 - math.comb(n - c, k) / math.comb(n, k)


def instability(scores: Sequence[float],
                success_threshold: float = DEFAULT_SUCCESS_THRESHOLD,
                k: int = DEFAULT_K) -> float:
    """Half failure-to-pass, half normalized score variance."""
    if len(scores) < 2:
        raise ValueError("instability needs at least 2 runs")
    n = len(scores)
    c = sum(1 for s in scores if s >= success_threshold)
    pass_term = 1.0 - pass_at_k(n, c, min(k, n))
    var_term = min(statistics.pvariance(scores) / _MAX_VARIANCE, 1.0)
    return 0.5 * pass_term + 0.5 * var_term


def density(d: Diagram, fan_normalizer: int = FAN_NORMALIZER,
            crossing_normalizer: int = CROSSING_NORMALIZER) -> float:
    """Blend of max fan-out, max fan-in, and straight-line crossings,
    each clipped at its normalizer. Empty edge set scores 0."""
    edges = {(e.src, e.dst) for e in d.edges}
    if not edges:
        return 0.0
    fan_out: dict[int, int] = {}
    fan_in: dict[int, int] = {}
    for src, dst in edges:
        fan_out[src] = fan_out.get(src, 0) + 1
        fan_in[dst] = fan_in.get(dst, 0) + 1
    crossings = count_crossings(d)
    return (
        0.4 * min(max(fan_out.values()) / fan_normalizer, 1.0)
        + 0.4 * min(max(fan_in.values()) / fan_normalizer, 1.0)
        + 0.2 * min(crossings / crossing_normalizer, 1.0)
    )


def build_sample_stats(per_run_scores: Mapping[str, Sequence[float]],
                       diagrams: Mapping[str, Diagram],
                       success_threshold: float = DEFAULT_SUCCESS_THRESHOLD,
                       k: int = DEFAULT_K,
                       fan_normalizer: int = FAN_NORMALIZER,
                       crossing_normalizer: int = CROSSING_NORMALIZER) -> list[SampleStats]:
    out = []
    for sample_id in sorted(per_run_scores):
        scores = tuple(per_run_scores[sample_id])
        n = len(scores)
        c = sum(1 for s in scores if s >= success_threshold)
        diagram = diagrams.get(sample_id)
        if diagram is not None:
            dens = density(diagram, fan_normalizer, crossing_normalizer)
            edges = {(e.src, e.dst) for e in diagram.edges}
            fo: dict[int, int] = {}
            fi: dict[int, int] = {}
            for src, dst in edges:
                fo[src] = fo.get(src, 0) + 1
                fi[dst] = fi.get(dst, 0) + 1
            max_fo = max(fo.values()) if fo else 0
            max_fi = max(fi.values()) if fi else 0
            crossings = count_crossings(diagram)
            ambiguous = bool(diagram.extra.get("ambiguous", False))
        else:
            dens, max_fo, max_fi, crossings, ambiguous = 0.0, 0, 0, 0, False
        out.append(SampleStats(
            sample_id=sample_id,
            run_scores=scores,
            pass_at_k=pass_at_k(n, c, min(k, n)),
            score_variance=statistics.pvariance(scores) if n > 1 else 0.0,
            instability=instability(scores, success_threshold, k),
            max_fan_out=max_fo,
            max_fan_in=max_fi,
            crossing_count=crossings,
            density=dens,
            ambiguous=ambiguous,
        ))
    return out


def select_hard(stats: Sequence[SampleStats],
                weight_instability: float = DEFAULT_INSTABILITY_WEIGHT,
                quota: int | None = None,
                ambiguity_bonus: float = DEFAULT_AMBIGUITY_BONUS) -> list[SampleStats]:
    """Rank by hardness = w * instability + (1 - w) * density, plus the
    ambiguity bonus for flagged samples, clipped to 1. Stable descending
    sort, ties by sample id ascending; top ``quota`` returned."""
    if not (0.0 <= weight_instability <= 1.0):
        raise ValueError("weight_instability must be in [0,1]")
    if quota is None:
        quota = len(stats)
    if quota > len(stats):
        raise ValueError(f"quota {quota} exceeds the {len(stats)} available samples")
    scored = []
    for s in stats:
        hardness = weight_instability * s.instability + (1.0 - weight_instability) * s.density
        if s.ambiguous:
            hardness = min(1.0, hardness + ambiguity_bonus)
        scored.append(replace(s, hardness=hardness))
    scored.sort(key=lambda s: (-s.hardness, s.sample_id))
    return scored[:quota]


def manifest_json(ranked: Sequence[SampleStats]) -> list[dict]:
    """Ranked manifest records: [{sample_id, hardness, components: {...}}]."""
    return [
        {
            "sample_id": s.sample_id,
            "hardness": s.hardness,
            "components": {
                "instability": s.instability,
                "density": s.density,
                "pass_at_k": s.pass_at_k,
                "score_variance": s.score_variance,
                "max_fan_out": s.max_fan_out,
                "max_fan_in": s.max_fan_in,
                "crossing_count": s.crossing_count,
                "ambiguous": s.ambiguous,
            },
        }
        for s in ranked
    ]
