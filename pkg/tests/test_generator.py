import statistics

import pytest
from hypothesis import given, settings, strategies as st

from metrovqa.generator import (
    Layout,
    QuestionInstance,
    check_layout,
    generate_graph,
    layout_graph,
    make_questions,
    question_for,
)
from metrovqa.graph import validate_graph
from metrovqa.nlq.templates import parse_question_regex
from metrovqa.program import Answer
from metrovqa.style import D_MIN, MIN_COLOR_DISTANCE, color_distance

from _util import make_graph


@pytest.mark.parametrize("seed", range(20))
def test_small_graph_shape(seed):
    g = generate_graph("small", seed)
    assert validate_graph(g) == []
    assert len(g.lines) == 3
    for line in g.lines:
        n_stations = len({s for e in g.edges if e.line_id == line.id for s in e.endpoints})
        assert 3 <= n_stations <= 4


def test_generation_is_deterministic():
    assert generate_graph("small", 42) == generate_graph("small", 42)
    assert generate_graph("large", 42) == generate_graph("large", 42)
    assert generate_graph("small", 42) != generate_graph("small", 43)


@pytest.mark.parametrize("size,nodes,edges,tol", [
    ("small", 10, 8, 2),
    ("medium", 15, 15, 3),
    ("large", 24, 26, 5),
])
def test_median_sizes(size, nodes, edges, tol):
    gs = [generate_graph(size, s) for s in range(100)]
    assert abs(statistics.median(len(g.stations) for g in gs) - nodes) <= tol
    assert abs(statistics.median(len(g.union_edges) for g in gs) - edges) <= tol


@pytest.mark.parametrize("size", ["small", "medium", "large"])
def test_line_colors_are_separated(size):
    for seed in range(20):
        colors = [l.color for l in generate_graph(size, seed).lines]
        for i, a in enumerate(colors):
            for b in colors[i + 1:]:
                assert color_distance(a, b) >= MIN_COLOR_DISTANCE


def test_path_layout_spacing():
    g = make_graph({0: ["a", "b", "c"]})
    lay = layout_graph(g, 0)
    assert len(lay.positions) == 3
    assert check_layout(g, lay) == []
    pts = list(lay.positions.values())
    assert all(((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2) ** 0.5 >= D_MIN for p in pts for q in pts if p != q)


def test_layout_is_deterministic():
    g = generate_graph("medium", 3)
    assert layout_graph(g, 9, 1024) == layout_graph(g, 9, 1024)


def test_layout_json_round_trip():
    g = generate_graph("small", 3)
    lay = layout_graph(g, 1)
    assert Layout.from_json(lay.to_json()) == lay


def test_hundred_small_layouts_satisfy_constraints():
    for seed in range(100):
        g = generate_graph("small", seed)
        lay = layout_graph(g, seed)
        assert check_layout(g, lay) == [], seed


def test_template_5_on_an_edge():
    g = make_graph({0: ["a", "b", "c"]})
    q = question_for(g, 5, ["a", "b"])
    assert q.surface_text == "Are a and b adjacent?"
    assert q.gold_answer == Answer.of_bool(True)


def test_template_8_fresh_name():
    g = make_graph({0: ["a", "b", "c"]})
    assert question_for(g, 8, ["zzz"]).gold_answer == Answer.of_bool(False)


def test_template_1_on_path():
    g = make_graph({0: ["a", "b", "c", "d"]})
    assert question_for(g, 1, ["a", "d"]).gold_answer == Answer.of_count(2)


def test_twelve_questions_cover_every_template():
    g = generate_graph("small", 5)
    qs = make_questions(g, 12, 5)
    assert sorted(q.template_id for q in qs) == list(range(1, 13))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["small", "medium", "large"]), st.integers(0, 10**6))
def test_questions_parse_back_to_gold(size, seed):
    g = generate_graph(size, seed)
    for q in make_questions(g, 15, seed):
        assert parse_question_regex(q.surface_text) == q.gold_program
        assert QuestionInstance.from_json(q.to_json()) == q


def test_answer_balance_for_boolean_templates():
    yes = no = 0
    for seed in range(60):
        g = generate_graph("medium", seed)
        for q in make_questions(g, 12, seed):
            if q.gold_answer.kind == "bool":
                yes += q.gold_answer.value
                no += not q.gold_answer.value
    assert yes > 0.25 * (yes + no) and no > 0.25 * (yes + no)
