import json

import pytest
from hypothesis import given, strategies as st

from metrovqa.generator import generate_graph
from metrovqa.graph import (
    Edge,
    GraphError,
    Line,
    Station,
    TransitGraph,
    canonical_station_name,
    graph_equivalent,
    graph_from_dict,
    load_graph,
    normalize_name,
    save_graph,
    validate_graph,
)

from _util import make_graph


def test_triangle_on_one_line_is_not_a_path():
    g = TransitGraph(
        (Station("x"), Station("y"), Station("z")),
        (Line(0, "red", (255, 0, 0)),),
        (Edge("x", "y", 0), Edge("y", "z", 0), Edge("x", "z", 0)),
    )
    assert "line 0 is not a simple path" in validate_graph(g)


def test_path_is_valid():
    assert validate_graph(make_graph({0: ["a", "b", "c"]})) == []


def test_two_components_reported():
    g = make_graph({0: ["a", "b"], 1: ["c", "d"]})
    assert "union graph disconnected" in validate_graph(g)


def test_branching_line_rejected():
    g = make_graph({0: ["a", "b", "c"]})
    g = TransitGraph(g.stations + (Station("d"),), g.lines, g.edges + (Edge("b", "d", 0),))
    assert "line 0 is not a simple path" in validate_graph(g)


def test_empty_graph_has_no_nodes():
    assert validate_graph(TransitGraph()) == ["no nodes"]


def test_duplicate_line_color():
    g = TransitGraph(
        (Station("a"), Station("b"), Station("c")),
        (Line(0, "red", (255, 0, 0)), Line(1, "blue", (255, 0, 0))),
        (Edge("a", "b", 0), Edge("b", "c", 1)),
    )
    assert any("shares its color" in v for v in validate_graph(g))


@pytest.mark.parametrize("raw,expected", [
    ("Leauts", "leauts"),
    ("  Main  Station ", "main station"),
    ("NILY", "nily"),
])
def test_normalize_name(raw, expected):
    assert normalize_name(raw) == expected


def test_normalize_rejects_blank():
    with pytest.raises(ValueError):
        normalize_name("   ")


def test_canonical_station_name_drops_spaces():
    assert canonical_station_name("Ober St Veit") == "oberstveit"


def test_edge_endpoints_are_ordered():
    e = Edge("b", "a", 3)
    assert (e.s1, e.s2) == ("a", "b")
    assert Edge("a", "b", 3) == e


def test_minimal_document():
    doc = {
        "stations": [{"name": "A"}, {"name": "B"}],
        "lines": [{"id": 0, "name": "red", "color": [255, 0, 0]}],
        "edges": [{"s1": "a", "s2": "b", "line_id": 0}],
    }
    g = graph_from_dict(doc)
    assert (len(g.stations), len(g.lines), len(g.edges)) == (2, 1, 1)
    assert g.stations[0].display_name == "A"


def test_unknown_station_in_edge_is_named():
    doc = {
        "stations": [{"name": "a"}, {"name": "b"}],
        "lines": [{"id": 0, "name": "red", "color": [255, 0, 0]}],
        "edges": [{"s1": "a", "s2": "ghost", "line_id": 0}],
    }
    with pytest.raises(GraphError, match="ghost"):
        graph_from_dict(doc)


def test_missing_field_has_locus():
    with pytest.raises(GraphError, match=r"lines\[0\]"):
        graph_from_dict({"stations": [], "lines": [{"id": 0, "name": "x"}], "edges": []})


def test_bad_json_has_line_and_column():
    with pytest.raises(GraphError, match="line 2 column"):
        load_graph('{\n  "stations": [,]\n}')


def test_invalid_graph_rejected_on_load_unless_disabled():
    text = save_graph(make_graph({0: ["a", "b"], 1: ["c", "d"]}))
    with pytest.raises(GraphError, match="disconnected"):
        load_graph(text)
    assert len(load_graph(text, validate=False).stations) == 4


def test_generated_medium_graph_round_trips_byte_identical():
    g = generate_graph("medium", 11)
    text = save_graph(g)
    assert save_graph(load_graph(text)) == text
    assert load_graph(text) == g


def test_union_graph_merges_parallel_lines():
    g = make_graph({0: ["a", "b", "c"], 1: ["a", "b", "d"]})
    assert g.neighbors["a"] == {"b"}
    assert g.lines_at["b"] == {0, 1}
    assert len(g.union_edges) == 3


def test_graph_equivalent_ignores_line_ids():
    a = make_graph({0: ["a", "b", "c"]})
    b = TransitGraph(a.stations, (Line(5, "l0", a.lines[0].color),), (Edge("a", "b", 5), Edge("b", "c", 5)))
    assert graph_equivalent(a, b)
    assert not graph_equivalent(a, make_graph({0: ["a", "c", "b"]}))


@given(st.integers(0, 10_000), st.sampled_from(["small", "medium", "large"]))
def test_save_load_save_is_stable(seed, size):
    g = generate_graph(size, seed)
    text = save_graph(g)
    assert save_graph(load_graph(text)) == text
    assert json.loads(text)["edges"] == sorted(json.loads(text)["edges"], key=lambda e: (e["s1"], e["s2"], e["line_id"]))
