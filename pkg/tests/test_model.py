from __future__ import annotations

import dataclasses

import pytest

from sysdiag.model import (
    BBox,
    Component,
    Diagram,
    Edge,
    QAItem,
    normalize_name,
    validate_diagram,
    validate_qa_item,
)


def make_diagram(**overrides) -> Diagram:
    base = dict(
        id="d1",
        image_ref="images/d1.png",
        width_px=800,
        height_px=600,
        components=(
            Component(1, "PLL", BBox(0.1, 0.1, 0.2, 0.1)),
            Component(2, "ADC", BBox(0.5, 0.1, 0.2, 0.1)),
            Component(3, "DSP", BBox(0.1, 0.5, 0.2, 0.1)),
        ),
        edges=(Edge(1, 2), Edge(2, 3)),
    )
    base.update(overrides)
    return Diagram(**base)


def test_clean_diagram_has_no_violations():
    assert validate_diagram(make_diagram()) == []


def test_self_loop_reported_by_edge_position():
    d = make_diagram(edges=(Edge(1, 1),))
    violations = validate_diagram(d)
    assert any(v.startswith("edge 0") and "self-loop" in v for v in violations)


def test_bbox_exceeding_unit_square_names_the_component():
    d = make_diagram(components=(
        Component(1, "PLL", BBox(0.1, 0.1, 0.2, 0.1)),
        Component(2, "ADC", BBox(0.9, 0.1, 0.3, 0.1)),
    ), edges=())
    violations = validate_diagram(d)
    assert any(v.startswith("component 2") and "exceeds unit square" in v
               for v in violations)


@pytest.mark.parametrize("mutate, fragment", [
    (lambda d: dataclasses.replace(d, width_px=0), "width_px"),
    (lambda d: dataclasses.replace(d, edges=(Edge(1, 9),)), "dst 9"),
    (lambda d: dataclasses.replace(d, edges=(Edge(9, 1),)), "src 9"),
    (lambda d: dataclasses.replace(d, components=d.components[:2] + (
        dataclasses.replace(d.components[2], index=2),)), "duplicate index"),
    (lambda d: dataclasses.replace(d, components=d.components[:2] + (
        dataclasses.replace(d.components[2], index=7),)), "contiguous"),
    (lambda d: dataclasses.replace(d, components=(
        dataclasses.replace(d.components[0], name="!!!"),) + d.components[1:]),
     "name empty"),
    (lambda d: dataclasses.replace(d, components=(
        dataclasses.replace(d.components[0], bbox=BBox(0.1, 0.1, 0.0, 0.1)),)
        + d.components[1:]), "non-positive"),
])
def test_single_field_mutations_break_an_invariant(mutate, fragment):
    violations = validate_diagram(mutate(make_diagram()))
    assert violations, "mutation should produce at least one violation"
    assert any(fragment in v for v in violations)


def test_fixture_corpus_is_clean(corpus):
    for d in corpus.dataset.diagrams:
        assert validate_diagram(d) == []
    ids = corpus.dataset.diagram_ids()
    for q in corpus.dataset.qa:
        assert validate_qa_item(q, ids) == []


def test_qa_item_invariants():
    q = QAItem(id="q1", question="?", options=(("A", "x"), ("B", "y")), answer="C")
    assert any("not an option label" in v for v in validate_qa_item(q))
    dup = QAItem(id="q2", question="?", options=(("A", "x"), ("A", "y")), answer="A")
    assert any("duplicate option labels" in v for v in validate_qa_item(dup))
    dangling = QAItem(id="q3", question="?", options=(("A", "x"),), answer="A",
                      diagram_id="nope")
    assert any("does not resolve" in v for v in validate_qa_item(dangling, {"d1"}))


@pytest.mark.parametrize("raw, expected", [
    ("PLL_Core ", "pll core"),
    ("ADC", "adc"),
    ("D-Flip-Flop", "d flip flop"),
    ("  SRAM   bank ", "sram bank"),
    ("(ADC)", "adc"),
    ("!!!", ""),
])
def test_normalize_name(raw, expected):
    assert normalize_name(raw) == expected
