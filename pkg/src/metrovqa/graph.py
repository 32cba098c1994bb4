"""Transit graph data model, validation and the JSON graph file format."""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Mapping

NAME_RE = re.compile(r"[a-z][a-z0-9]*")

ATTRIBUTE_KEYS = (
    "size",
    "architecture",
    "cleanliness",
    "disabled_access",
    "rail_access",
    "music",
)


class GraphError(ValueError):
    """Raised for malformed graph documents or invalid graphs."""


def normalize_name(s: str) -> str:
    """Lowercase, trim, and collapse internal whitespace to single spaces."""
    out = " ".join(s.split()).lower()
    if not out:
        raise ValueError("name is empty after normalization")
    return out


def canonical_station_name(display: str) -> str:
    """Station identifiers drop whitespace entirely: "Main Station" -> "mainstation"."""
    return "".join(display.split()).lower()


@dataclass(frozen=True)
class Station:
    name: str
    display_name: str = ""
    attributes: Mapping[str, str] | None = None

    def __post_init__(self):
        if not self.display_name:
            object.__setattr__(self, "display_name", self.name)


@dataclass(frozen=True)
class Line:
    id: int
    name: str
    color: tuple[int, int, int]
    built: str | None = None
    aircon: bool | None = None

    @property
    def hex_color(self) -> str:
        return "#%02x%02x%02x" % self.color


@dataclass(frozen=True, order=True)
class Edge:
    s1: str
    s2: str
    line_id: int

    def __post_init__(self):
        if self.s2 < self.s1:
            a, b = self.s2, self.s1
            object.__setattr__(self, "s1", a)
            object.__setattr__(self, "s2", b)

    @property
    def endpoints(self) -> tuple[str, str]:
        return (self.s1, self.s2)


@dataclass(frozen=True)
class TransitGraph:
    """Immutable container. Construction does not validate; see validate_graph."""

    stations: tuple[Station, ...] = ()
    lines: tuple[Line, ...] = ()
    edges: tuple[Edge, ...] = ()
    violations: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "stations", tuple(sorted(self.stations, key=lambda s: s.name)))
        object.__setattr__(self, "lines", tuple(sorted(self.lines, key=lambda l: l.id)))
        object.__setattr__(self, "edges", tuple(sorted(set(self.edges))))

    @cached_property
    def station_names(self) -> frozenset[str]:
        return frozenset(s.name for s in self.stations)

    @cached_property
    def line_by_id(self) -> dict[int, Line]:
        return {l.id: l for l in self.lines}

    @cached_property
    def line_by_name(self) -> dict[str, Line]:
        return {l.name: l for l in self.lines}

    @cached_property
    def neighbors(self) -> dict[str, frozenset[str]]:
        """Union-graph adjacency; parallel edges of different lines collapse."""
        adj: dict[str, set[str]] = {s.name: set() for s in self.stations}
        for e in self.edges:
            if e.s1 == e.s2:
                continue
            adj.setdefault(e.s1, set()).add(e.s2)
            adj.setdefault(e.s2, set()).add(e.s1)
        return {k: frozenset(v) for k, v in adj.items()}

    @cached_property
    def union_edges(self) -> frozenset[tuple[str, str]]:
        return frozenset(e.endpoints for e in self.edges if e.s1 != e.s2)

    @cached_property
    def lines_at(self) -> dict[str, frozenset[int]]:
        out: dict[str, set[int]] = defaultdict(set)
        for e in self.edges:
            out[e.s1].add(e.line_id)
            out[e.s2].add(e.line_id)
        return {k: frozenset(v) for k, v in out.items()}

    def with_violations(self, violations: Iterable[str]) -> "TransitGraph":
        return TransitGraph(self.stations, self.lines, self.edges, tuple(violations))


def _components(nodes: Iterable[str], adj: Mapping[str, Iterable[str]]) -> list[set[str]]:
    seen: set[str] = set()
    comps = []
    for start in sorted(nodes):
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj.get(u, ()):
                if v not in comp:
                    comp.add(v)
                    stack.append(v)
        seen |= comp
        comps.append(comp)
    return comps


def _is_simple_path(edges: list[Edge]) -> bool:
    adj: dict[str, set[str]] = defaultdict(set)
    for e in edges:
        adj[e.s1].add(e.s2)
        adj[e.s2].add(e.s1)
    if any(len(v) > 2 for v in adj.values()):
        return False
    # a connected graph with max degree 2 and |E| = |V| - 1 is a path
    if len(edges) != len(adj) - 1:
        return False
    return len(_components(adj, adj)) == 1


def validate_graph(g: TransitGraph) -> list[str]:
    """Return every invariant violation of ``g``; an empty list means valid."""
    problems: list[str] = []
    names = [s.name for s in g.stations]
    seen: set[str] = set()
    for s in g.stations:
        if not NAME_RE.fullmatch(s.name):
            problems.append(f"station name {s.name!r} is not a canonical identifier")
        if canonical_station_name(s.display_name) != s.name:
            problems.append(f"station {s.name!r} display name {s.display_name!r} does not normalize to it")
        if s.name in seen:
            problems.append(f"duplicate station {s.name!r}")
        seen.add(s.name)
    if not names:
        problems.append("no nodes")

    ids: set[int] = set()
    lnames: set[str] = set()
    colors: dict[tuple[int, int, int], int] = {}
    for l in g.lines:
        if l.id in ids:
            problems.append(f"duplicate line id {l.id}")
        ids.add(l.id)
        if l.name in lnames:
            problems.append(f"duplicate line name {l.name!r}")
        lnames.add(l.name)
        if not all(0 <= c <= 255 for c in l.color) or len(l.color) != 3:
            problems.append(f"line {l.id} color {l.color} out of range")
        if l.color in colors:
            problems.append(f"line {l.id} shares its color with line {colors[l.color]}")
        colors.setdefault(l.color, l.id)

    by_line: dict[int, list[Edge]] = defaultdict(list)
    for e in g.edges:
        for end in e.endpoints:
            if end not in seen:
                problems.append(f"edge {e.s1}-{e.s2} references unknown station {end!r}")
        if e.s1 == e.s2:
            problems.append(f"edge {e.s1}-{e.s2} is a self loop")
        if e.line_id not in ids:
            problems.append(f"edge {e.s1}-{e.s2} references unknown line {e.line_id}")
        by_line[e.line_id].append(e)

    for lid in sorted(ids):
        if not by_line.get(lid):
            problems.append(f"line {lid} has no edges")
        elif not _is_simple_path(by_line[lid]):
            problems.append(f"line {lid} is not a simple path")

    if names and len(_components(names, g.neighbors)) > 1:
        problems.append("union graph disconnected")
    return problems


def graph_equivalent(a: TransitGraph, b: TransitGraph) -> bool:
    """Same stations, lines and edges, ignoring line ids and station attributes."""
    def sig(g):
        lines = {l.id: (l.name, tuple(l.color)) for l in g.lines}
        return (
            g.station_names,
            frozenset(lines.values()),
            frozenset((e.s1, e.s2, lines.get(e.line_id)) for e in g.edges),
        )

    return sig(a) == sig(b)


# -- file format ---------------------------------------------------------


def graph_to_dict(g: TransitGraph) -> dict[str, Any]:
    stations = []
    for s in g.stations:
        rec: dict[str, Any] = {"name": s.display_name}
        if s.attributes:
            rec["attributes"] = {k: s.attributes[k] for k in sorted(s.attributes)}
        stations.append(rec)
    lines = []
    for l in g.lines:
        rec = {"id": l.id, "name": l.name, "color": list(l.color)}
        if l.built is not None:
            rec["built"] = l.built
        if l.aircon is not None:
            rec["aircon"] = l.aircon
        lines.append(rec)
    edges = [{"s1": e.s1, "s2": e.s2, "line_id": e.line_id} for e in g.edges]
    return {"stations": stations, "lines": lines, "edges": edges}


def _require(rec: Any, key: str, where: str, kind: type | tuple[type, ...]):
    if not isinstance(rec, dict) or key not in rec:
        raise GraphError(f"{where}: missing field {key!r}")
    val = rec[key]
    if not isinstance(val, kind) or (kind is int and isinstance(val, bool)):
        raise GraphError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {val!r}")
    return val


def graph_from_dict(doc: Any, validate: bool = True) -> TransitGraph:
    if not isinstance(doc, dict):
        raise GraphError("top level: expected an object")
    stations = []
    for i, rec in enumerate(doc.get("stations", [])):
        display = _require(rec, "name", f"stations[{i}]", str)
        attrs = rec.get("attributes")
        if attrs is not None and not isinstance(attrs, dict):
            raise GraphError(f"stations[{i}].attributes: expected object")
        stations.append(Station(canonical_station_name(display), display, attrs or None))
    lines = []
    for i, rec in enumerate(doc.get("lines", [])):
        lid = _require(rec, "id", f"lines[{i}]", int)
        name = _require(rec, "name", f"lines[{i}]", str)
        color = _require(rec, "color", f"lines[{i}]", list)
        if len(color) != 3 or not all(isinstance(c, int) for c in color):
            raise GraphError(f"lines[{i}].color: expected [r, g, b]")
        lines.append(Line(lid, name, tuple(color), rec.get("built"), rec.get("aircon")))
    known = {s.name for s in stations}
    edges = []
    for i, rec in enumerate(doc.get("edges", [])):
        s1 = _require(rec, "s1", f"edges[{i}]", str)
        s2 = _require(rec, "s2", f"edges[{i}]", str)
        lid = _require(rec, "line_id", f"edges[{i}]", int)
        for s in (s1, s2):
            if s not in known:
                raise GraphError(f"edges[{i}]: unknown station {s!r}")
        edges.append(Edge(s1, s2, lid))
    g = TransitGraph(tuple(stations), tuple(lines), tuple(edges))
    if validate:
        problems = validate_graph(g)
        if problems:
            raise GraphError("invalid graph: " + "; ".join(problems))
    return g


def save_graph(g: TransitGraph) -> str:
    return json.dumps(graph_to_dict(g), indent=2) + "\n"


def load_graph(text: str, validate: bool = True) -> TransitGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return graph_from_dict(doc, validate=validate)
