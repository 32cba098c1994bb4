"""Seeded synthesis of metro graphs, their layouts, and question instances."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import networkx as nx
import numpy as np

from metrovqa.graph import Edge, Line, Station, TransitGraph, normalize_name, validate_graph
from metrovqa.nlq.templates import TEMPLATES, get_template, instantiate_template
from metrovqa.program import Answer, FunctionalProgram
from metrovqa import reasoner
from metrovqa.style import D_MIN, E_MIN, NODE_RADIUS, PALETTE, canvas_size


class GenerationError(RuntimeError):
    pass


class LayoutError(RuntimeError):
    pass


@dataclass(frozen=True)
class SizeClass:
    tag: str
    lines: int
    max_stations_per_line: int
    # relative weights for line lengths 3..max
    length_weights: tuple[float, ...]
    # chance that a later line shares two stations instead of one
    double_interchange: float


SIZES = {
    "small": SizeClass("small", 3, 4, (1, 5), 0.2),
    "medium": SizeClass("medium", 4, 6, (0, 2, 3, 1), 0.5),
    "large": SizeClass("large", 5, 8, (0, 0, 2, 3, 3, 1), 0.6),
}
MIN_STATIONS_PER_LINE = 3

_CONSONANTS = "bcdfghjklmnprstvwz"
_VOWELS = "aeiou"
_ARCH = ("victorian", "modernist", "brutalist", "glass", "art deco", "concrete")
_MUSIC = ("none", "classical", "jazz", "rock", "pop", "country")


def size_class(tag: str | SizeClass) -> SizeClass:
    if isinstance(tag, SizeClass):
        return tag
    try:
        return SIZES[tag]
    except KeyError:
        raise ValueError(f"unknown size class {tag!r}") from None


def random_word(rng: random.Random, lo: int = 4, hi: int = 9) -> str:
    n = rng.randint(lo, hi)
    vowel = rng.random() < 0.3
    chars = []
    for _ in range(n):
        chars.append(rng.choice(_VOWELS if vowel else _CONSONANTS))
        vowel = not vowel
    return "".join(chars)


def _station_attrs(rng: random.Random) -> dict[str, str]:
    return {
        "size": rng.choice(("small", "medium", "large")),
        "architecture": rng.choice(_ARCH),
        "cleanliness": rng.choice(("clean", "shabby", "dirty")),
        "disabled_access": rng.choice(("yes", "no")),
        "rail_access": rng.choice(("yes", "no")),
        "music": rng.choice(_MUSIC),
    }


def _try_generate(size: SizeClass, rng: random.Random) -> TransitGraph | None:
    used_names: set[str] = set()

    def fresh_name(lo=4, hi=9):
        while True:
            w = random_word(rng, lo, hi)
            if w not in used_names:
                used_names.add(w)
                return w

    lengths = list(range(MIN_STATIONS_PER_LINE, size.max_stations_per_line + 1))
    station_order: list[str] = []
    union: set[frozenset[str]] = set()
    line_paths: list[list[str]] = []
    for i in range(size.lines):
        n = rng.choices(lengths, weights=size.length_weights)[0]
        reuse: list[str] = []
        if i > 0:
            k = 2 if rng.random() < size.double_interchange else 1
            reuse = rng.sample(station_order, min(k, len(station_order)))
        for _ in range(50):
            seq = reuse + [None] * (n - len(reuse))
            rng.shuffle(seq)
            ok = True
            for a, b in zip(seq, seq[1:]):
                if a is not None and b is not None and frozenset((a, b)) in union:
                    ok = False
                    break
            if ok:
                break
        else:
            return None
        path = [s if s is not None else fresh_name() for s in seq]
        for s in path:
            if s not in station_order:
                station_order.append(s)
        union.update(frozenset(p) for p in zip(path, path[1:]))
        line_paths.append(path)

    stations = tuple(Station(s, s.capitalize(), _station_attrs(rng)) for s in station_order)
    colors = rng.sample(PALETTE, size.lines)
    lines = tuple(
        Line(i, fresh_name(4, 7), colors[i], f"{rng.randrange(1900, 2020, 10)}s", rng.random() < 0.5)
        for i in range(size.lines)
    )
    edges = tuple(Edge(a, b, i) for i, path in enumerate(line_paths) for a, b in zip(path, path[1:]))
    g = TransitGraph(stations, lines, edges)
    return g if not validate_graph(g) else None


def generate_graph(size: SizeClass | str, seed: int, max_tries: int = 100) -> TransitGraph:
    size = size_class(size)
    for attempt in range(max_tries):
        rng = random.Random(f"graph:{size.tag}:{seed}:{attempt}")
        g = _try_generate(size, rng)
        if g is not None:
            return g
    raise GenerationError(f"could not generate a {size.tag} graph for seed {seed}")


# -- layout ----------------------------------------------------------------


@dataclass(frozen=True)
class Layout:
    positions: dict[str, tuple[int, int]]
    width: int
    height: int

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "positions": {k: list(v) for k, v in sorted(self.positions.items())},
        }

    @classmethod
    def from_json(cls, d: dict) -> "Layout":
        return cls({k: (int(v[0]), int(v[1])) for k, v in d["positions"].items()}, d["width"], d["height"])


def point_segment_distance(p, a, b) -> float:
    px, py = p
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / L2))
    return math.hypot(px - ax - t * dx, py - ay - t * dy)


def check_layout(g: TransitGraph, layout: Layout, margin: int = 0,
                 d_min: float = D_MIN, e_min: float = E_MIN) -> list[str]:
    """Every violated layout constraint, described."""
    out = []
    pos = layout.positions
    for s in g.stations:
        if s.name not in pos:
            out.append(f"station {s.name} has no position")
    if out:
        return out
    for s in g.stations:
        x, y = pos[s.name]
        if not (margin <= x < layout.width - margin and margin <= y < layout.height - margin):
            out.append(f"station {s.name} at {pos[s.name]} outside the canvas margin")
    for a, b in combinations(sorted(pos), 2):
        d = math.dist(pos[a], pos[b])
        if d < d_min:
            out.append(f"stations {a} and {b} only {d:.1f}px apart")
    for u, v in sorted(g.union_edges):
        for s in g.station_names - {u, v}:
            d = point_segment_distance(pos[s], pos[u], pos[v])
            if d < e_min:
                out.append(f"station {s} only {d:.1f}px from edge {u}-{v}")
    return out


def _repair(names, edges, P, width, height, margin, d_min, e_min, passes=400):
    idx = {n: i for i, n in enumerate(names)}
    E = [(idx[u], idx[v]) for u, v in edges]
    lo = np.array([margin, margin], float)
    hi = np.array([width - 1 - margin, height - 1 - margin], float)
    for _ in range(passes):
        moved = False
        for i, j in combinations(range(len(names)), 2):
            d = P[j] - P[i]
            dist = float(np.hypot(*d))
            if dist < d_min + 2:
                if dist < 1e-6:
                    d = np.array([1.0, 0.0])
                    dist = 1.0
                push = (d_min + 3 - dist) / 2 * d / dist
                P[i] -= push
                P[j] += push
                moved = True
        for k in range(len(names)):
            for i, j in E:
                if k in (i, j):
                    continue
                a, b = P[i], P[j]
                ab = b - a
                L2 = float(ab @ ab) or 1.0
                t = min(1.0, max(0.0, float((P[k] - a) @ ab) / L2))
                foot = a + t * ab
                off = P[k] - foot
                dist = float(np.hypot(*off))
                if dist < e_min + 2:
                    if dist < 1e-6:
                        off = np.array([-ab[1], ab[0]])
                        dist = float(np.hypot(*off)) or 1.0
                    step = (e_min + 3 - dist) * off / dist
                    P[k] += step * 0.7
                    P[i] -= step * 0.15
                    P[j] -= step * 0.15
                    moved = True
        np.clip(P, lo, hi, out=P)
        if not moved:
            break
    return P


def layout_graph(g: TransitGraph, seed: int, width: int = 1024, height: int | None = None,
                 margin: int = 60, max_tries: int = 25) -> Layout:
    """Force-directed placement followed by hard minimum-distance repair."""
    height = height or width
    names = sorted(g.station_names)
    edges = sorted(g.union_edges)
    G = nx.Graph()
    G.add_nodes_from(names)
    G.add_edges_from(edges)
    for attempt in range(max_tries):
        init_seed = (seed * 7919 + attempt) % (2**32)
        raw = nx.spring_layout(G, seed=init_seed, iterations=200)
        P = np.array([raw[n] for n in names], float).reshape(-1, 2)
        if len(names) > 1:
            P -= P.min(axis=0)
            span = P.max(axis=0)
            span[span == 0] = 1
            P = P / span
        else:
            P[:] = 0.5
        P = margin + P * np.array([width - 1 - 2 * margin, height - 1 - 2 * margin])
        P = _repair(names, edges, P, width, height, margin, D_MIN, E_MIN)
        layout = Layout({n: (int(round(x)), int(round(y))) for n, (x, y) in zip(names, P)}, width, height)
        if not check_layout(g, layout, margin):
            return layout
    raise LayoutError(f"no valid layout after {max_tries} attempts (seed {seed})")


# -- questions -------------------------------------------------------------


@dataclass(frozen=True)
class QuestionInstance:
    template_id: int
    surface_text: str
    bindings: tuple[str, ...]
    gold_program: FunctionalProgram
    gold_answer: Answer

    def to_json(self) -> dict:
        return {
            "template_id": self.template_id,
            "surface_text": self.surface_text,
            "bindings": list(self.bindings),
            "gold_program": self.gold_program.text(),
            "gold_answer": self.gold_answer.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "QuestionInstance":
        from metrovqa.program import parse_program

        return cls(d["template_id"], d["surface_text"], tuple(d["bindings"]),
                   parse_program(d["gold_program"]), Answer.from_json(d["gold_answer"]))


def _display(g: TransitGraph, name: str) -> str:
    for s in g.stations:
        if s.name == name:
            return s.display_name
    return name.capitalize()


def _bindings(tid: int, g: TransitGraph, rng: random.Random) -> tuple[list[str], list[str]] | None:
    """Canonical bindings and their surface forms, or None if unsatisfiable."""
    names = sorted(g.station_names)
    if tid == 12:
        if not g.lines:
            return None
        line = rng.choice(g.lines)
        return [line.name], [line.name.capitalize()]
    if tid == 8 and rng.random() < 0.35:
        while True:
            w = random_word(rng)
            if rng.random() < 0.3:
                w += str(rng.randrange(10))
            if w not in g.station_names:
                return [w], [w.capitalize()]
    if get_template(tid).arity == 1:
        if not names:
            return None
        s = rng.choice(names)
        return [s], [_display(g, s)]
    if len(names) < 2:
        return None
    pairs = list(combinations(names, 2))
    want_positive = rng.random() < 0.5
    preferred: list[tuple[str, str]] = []
    if tid == 5:
        preferred = sorted(g.union_edges) if want_positive else [p for p in pairs if p not in g.union_edges]
    elif tid == 6:
        preferred = [p for p in pairs if reasoner.common_adjacent_stations(g, *p)]
    elif tid == 7:
        preferred = [p for p in pairs if bool(reasoner.common_adjacent_stations(g, *p)) == want_positive]
    elif tid == 11:
        preferred = [p for p in pairs if reasoner.same_line(g, *p) == want_positive]
    elif tid in (1, 3):
        dist = {a: reasoner.bfs_distances(g, a) for a in names}
        preferred = [p for p in pairs if p[1] in dist[p[0]]]
    a, b = rng.choice(preferred or pairs)
    if rng.random() < 0.5:
        a, b = b, a
    return [a, b], [_display(g, a), _display(g, b)]


def question_for(g: TransitGraph, template_id: int, surface: Sequence[str]) -> QuestionInstance:
    """Instance of a template for explicit surface bindings, with its gold answer."""
    canon = [normalize_name(b) for b in surface]
    program = get_template(template_id).program(canon)
    return QuestionInstance(template_id, instantiate_template(template_id, surface), tuple(canon),
                            program, reasoner.evaluate(program, g))


def make_question(g: TransitGraph, template_id: int, rng: random.Random) -> QuestionInstance | None:
    picked = _bindings(template_id, g, rng)
    if picked is None:
        return None
    return question_for(g, template_id, picked[1])


def make_questions(g: TransitGraph, n: int, seed: int) -> list[QuestionInstance]:
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = random.Random(f"questions:{seed}")
    ids = [t.id for t in TEMPLATES]
    if n >= len(ids):
        order = rng.sample(ids, len(ids)) + [rng.choice(ids) for _ in range(n - len(ids))]
    else:
        order = rng.sample(ids, n)
    out = []
    for tid in order:
        q = make_question(g, tid, rng)
        if q is None:
            # fall back to any satisfiable template
            for alt in rng.sample(ids, len(ids)):
                q = make_question(g, alt, rng)
                if q is not None:
                    break
        if q is not None:
            out.append(q)
    return out
