from __future__ import annotations

import math
import random

import numpy as np
import pytest

from oracles import mc_pass_at_k
from sysdiag.hardsample import (
    SampleStats,
    build_sample_stats,
    density,
    instability,
    manifest_json,
    pass_at_k,
    select_hard,
)
from sysdiag.model import BBox, Component, Diagram, Edge


class TestPassAtK:
    @pytest.mark.parametrize("n, c, k, expected", [
        (4, 4, 1, 1.0),
        (4, 0, 2, 0.0),
        (4, 2, 2, 5 / 6),
        (4, 2, 1, 0.5),
        (10, 10, 3, 1.0),
    ])
    def test_examples(self, n, c, k, expected):
        assert pass_at_k(n, c, k) == pytest.approx(expected, abs=1e-12)

    def test_enumeration_oracle_for_4_2_2(self):
        # All C(4,2)=6 draws of 2 from {s,s,f,f}: only {f,f} misses.
        from itertools import combinations
        items = ["s", "s", "f", "f"]
        draws = list(combinations(range(4), 2))
        hits = sum(1 for d in draws if any(items[i] == "s" for i in d))
        assert pass_at_k(4, 2, 2) == pytest.approx(hits / len(draws))

    def test_bad_arguments_rejected(self):
        with pytest.raises(ValueError):
            pass_at_k(4, 2, 5)  # k > n
        with pytest.raises(ValueError):
            pass_at_k(4, 5, 2)  # c > n
        with pytest.raises(ValueError):
            pass_at_k(0, 0, 1)

    def test_monotone_in_c_and_k(self):
        for n in range(1, 11):
            for k in range(1, n + 1):
                vals = [pass_at_k(n, c, k) for c in range(n + 1)]
                assert vals == sorted(vals)
            for c in range(n + 1):
                vals = [pass_at_k(n, c, k) for k in range(1, n + 1)]
                assert vals == sorted(vals)

    def test_against_monte_carlo(self):
        rng = np.random.default_rng(2024)
        for n in range(1, 11):
            for c in range(n + 1):
                mc = mc_pass_at_k(n, c, trials=20_000, rng=rng)
                for k in range(1, n + 1):
                    assert math.isclose(pass_at_k(n, c, k), mc[k - 1], abs_tol=0.02)


class TestInstability:
    def test_stable_success_scores_zero(self):
        assert instability([0.9, 0.9, 0.9, 0.9], 0.5, 2) == 0.0

    def test_stable_failure_scores_half(self):
        assert instability([0.1, 0.1, 0.1, 0.1], 0.5, 2) == 0.5

    def test_alternating_scores(self):
        assert instability([0.0, 1.0, 0.0, 1.0], 0.5, 1) == pytest.approx(0.75)

    def test_needs_two_runs(self):
        with pytest.raises(ValueError):
            instability([1.0], 0.5, 1)


def diagram(edges: list[tuple[int, int]], n: int, spread: bool = True) -> Diagram:
    comps = []
    for i in range(n):
        cx = 0.05 + (i % 4) * 0.25 if spread else 0.1 + i * 0.08
        cy = 0.05 + (i // 4) * 0.3 if spread else 0.5
        comps.append(Component(i + 1, f"C{i+1}", BBox(cx, cy, 0.1, 0.1)))
    return Diagram(id="h", image_ref="h.png", width_px=100, height_px=100,
                   components=tuple(comps),
                   edges=tuple(Edge(s, d) for s, d in edges))


class TestDensity:
    def test_empty_graph(self):
        assert density(diagram([], 3)) == 0.0

    def test_hub_with_fan_out_six(self):
        d = diagram([(1, t) for t in range(2, 8)], 7)
        # fan-out term saturates, fan-in stays 1/6, no crossings by layout
        expected = 0.4 * 1.0 + 0.4 * (1 / 6) + 0.2 * min(
            __import__("sysdiag.geometry", fromlist=["count_crossings"]).count_crossings(d) / 10, 1)
        assert density(d) == pytest.approx(expected)

    def test_chain_of_five(self):
        d = diagram([(1, 2), (2, 3), (3, 4), (4, 5)], 5, spread=False)
        assert density(d) == pytest.approx(2 / 15)

    def test_invariant_to_edge_order_and_reindexing(self):
        edges = [(1, 2), (1, 3), (2, 3), (3, 4)]
        d = diagram(edges, 4)
        base = density(d)
        shuffled = diagram(list(reversed(edges)), 4)
        assert density(shuffled) == base
        # Relabel components by the permutation 1->4, 2->3, 3->2, 4->1.
        perm = {1: 4, 2: 3, 3: 2, 4: 1}
        comps = tuple(
            Component(perm[c.index], c.name, c.bbox) for c in d.components
        )
        remapped = Diagram(id="h", image_ref="h.png", width_px=100, height_px=100,
                           components=comps,
                           edges=tuple(Edge(perm[s], perm[t]) for s, t in edges))
        assert density(remapped) == pytest.approx(base)


def stats(sample_id: str, inst: float, dens: float, ambiguous: bool = False) -> SampleStats:
    return SampleStats(sample_id=sample_id, run_scores=(0.0, 1.0), pass_at_k=0.5,
                       score_variance=0.25, instability=inst, max_fan_out=1,
                       max_fan_in=1, crossing_count=0, density=dens,
                       ambiguous=ambiguous)


class TestSelectHard:
    def test_orders_by_hardness(self):
        ranked = select_hard([stats("a", 0.1, 0.1), stats("b", 0.9, 0.9)])
        assert [s.sample_id for s in ranked] == ["b", "a"]
        assert ranked[0].hardness > ranked[1].hardness

    def test_tie_breaks_on_sample_id(self):
        ranked = select_hard([stats("z", 0.5, 0.5), stats("a", 0.5, 0.5)])
        assert [s.sample_id for s in ranked] == ["a", "z"]

    def test_quota_prefix_property(self):
        rng = random.Random(8)
        pool = [stats(f"s{i}", rng.random(), rng.random()) for i in range(20)]
        full = select_hard(pool)
        for quota in (1, 5, 12, 20):
            assert [s.sample_id for s in select_hard(pool, quota=quota)] == \
                [s.sample_id for s in full[:quota]]

    def test_quota_exceeding_pool_rejected(self):
        with pytest.raises(ValueError):
            select_hard([stats("a", 0.1, 0.1)], quota=2)

    def test_ambiguity_flag_adds_bonus(self):
        plain = select_hard([stats("a", 0.4, 0.4)])[0].hardness
        flagged = select_hard([stats("a", 0.4, 0.4, ambiguous=True)])[0].hardness
        assert flagged == pytest.approx(plain + 0.1)

    def test_hardness_stays_in_unit_interval(self):
        ranked = select_hard([stats("a", 1.0, 1.0, ambiguous=True)])
        assert ranked[0].hardness == 1.0

    def test_weight_blend(self):
        s = stats("a", 1.0, 0.0)
        assert select_hard([s], weight_instability=1.0)[0].hardness == 1.0
        assert select_hard([s], weight_instability=0.0)[0].hardness == 0.0


class TestBuildStats:
    def test_stats_from_runs_and_annotations(self):
        d = diagram([(1, 2), (1, 3)], 3)
        per_run = {"h": [1.0, 0.2]}
        out = build_sample_stats(per_run, {"h": d})
        assert len(out) == 1
        s = out[0]
        assert s.run_scores == (1.0, 0.2)
        assert s.max_fan_out == 2 and s.max_fan_in == 1
        assert s.pass_at_k == pytest.approx(1.0)  # one success among two runs, k=2
        assert 0.0 <= s.instability <= 1.0

    def test_ambiguous_flag_read_from_annotations(self):
        d = diagram([(1, 2)], 2)
        flagged = Diagram(id="h", image_ref="h.png", width_px=100, height_px=100,
                          components=d.components, edges=d.edges,
                          extra={"ambiguous": True})
        out = build_sample_stats({"h": [0.5, 0.5]}, {"h": flagged})
        assert out[0].ambiguous

    def test_manifest_shape(self):
        ranked = select_hard([stats("a", 0.5, 0.5)])
        [rec] = manifest_json(ranked)
        assert rec["sample_id"] == "a"
        assert set(rec["components"]) >= {"instability", "density", "pass_at_k",
                                          "max_fan_out", "max_fan_in", "crossing_count"}
