"""Native evaluator for functional programs plus the ASP fact emitter.

Each primitive mirrors the semantics of the corresponding ASP question
encoding but runs directly on the union graph, so no solver is needed.
"""

from __future__ import annotations

from collections import deque
from typing import Callable

from metrovqa.graph import TransitGraph, normalize_name
from metrovqa.program import Answer, FunctionalProgram

DEFAULT_HOPS = 2


class ReasoningError(Exception):
    pass


class UnknownStation(ReasoningError):
    def __init__(self, name: str):
        super().__init__(f"unknown station {name!r}")
        self.name = name


class UnknownLine(ReasoningError):
    def __init__(self, name: str):
        super().__init__(f"unknown line {name!r}")
        self.name = name


class NoPath(ReasoningError):
    pass


def _need(g: TransitGraph, *names: str) -> None:
    for n in names:
        if n not in g.station_names:
            raise UnknownStation(n)


def bfs_distances(g: TransitGraph, source: str) -> dict[str, int]:
    dist = {source: 0}
    queue = deque([source])
    adj = g.neighbors
    while queue:
        u = queue.popleft()
        for v in adj.get(u, ()):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def shortest_path_hops(g: TransitGraph, s1: str, s2: str) -> int:
    _need(g, s1, s2)
    d = bfs_distances(g, s1).get(s2)
    if d is None:
        raise NoPath(f"no path between {s1!r} and {s2!r}")
    return d


def count_nodes_between(g: TransitGraph, s1: str, s2: str) -> int:
    # intermediate stations on a shortest path: one fewer than its hop count
    return max(shortest_path_hops(g, s1, s2) - 1, 0)


def within_hops_count(g: TransitGraph, s: str, k: int = DEFAULT_HOPS) -> int:
    _need(g, s)
    return sum(1 for t, d in bfs_distances(g, s).items() if 1 <= d <= k)


def count_simple_paths(g: TransitGraph, s1: str, s2: str) -> int:
    _need(g, s1, s2)
    if s1 == s2:
        return 1
    order = sorted(g.station_names)
    idx = {n: i for i, n in enumerate(order)}
    adj = [[idx[v] for v in g.neighbors[n]] for n in order]
    target = idx[s2]
    # only vertices that can still reach the target matter; prune by component
    reach = bfs_distances(g, s2)
    if s1 not in reach:
        return 0

    count = 0
    stack = [(idx[s1], 1 << idx[s1], iter(adj[idx[s1]]))]
    while stack:
        u, mask, it = stack[-1]
        v = next(it, None)
        if v is None:
            stack.pop()
            continue
        if mask >> v & 1:
            continue
        if v == target:
            count += 1
            continue
        stack.append((v, mask | 1 << v, iter(adj[v])))
    return count


def on_cycle(g: TransitGraph, s: str) -> bool:
    """True iff ``s`` lies on a simple cycle of at least three stations.

    In a simple graph that is the case iff some incident edge is not a
    bridge, i.e. a neighbour stays reachable once that edge is removed.
    """
    _need(g, s)
    adj = g.neighbors
    for a in adj[s]:
        seen = {a}
        queue = deque([a])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if u == a and v == s:
                    continue
                if v == s:
                    return True
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
    return False


def adjacent(g: TransitGraph, s1: str, s2: str) -> bool:
    _need(g, s1, s2)
    return s2 in g.neighbors[s1]


def common_adjacent_stations(g: TransitGraph, s1: str, s2: str) -> list[str]:
    _need(g, s1, s2)
    return sorted((g.neighbors[s1] & g.neighbors[s2]) - {s1, s2})


def station_exists(g: TransitGraph, name: str) -> bool:
    try:
        return normalize_name(name) in g.station_names
    except ValueError:
        return False


def lines_of_station(g: TransitGraph, s: str) -> list[str]:
    _need(g, s)
    return sorted(g.line_by_id[i].name for i in g.lines_at.get(s, ()) if i in g.line_by_id)


def same_line(g: TransitGraph, s1: str, s2: str) -> bool:
    _need(g, s1, s2)
    return bool(g.lines_at.get(s1, frozenset()) & g.lines_at.get(s2, frozenset()))


def stations_of_line(g: TransitGraph, line_name: str) -> list[str]:
    line = g.line_by_name.get(line_name)
    if line is None:
        raise UnknownLine(line_name)
    out = set()
    for e in g.edges:
        if e.line_id == line.id:
            out.update(e.endpoints)
    return sorted(out)


# -- program evaluation ------------------------------------------------------


class _PathCost:
    """Value flowing out of shortestPath: the minimal edge count C."""

    def __init__(self, cost: int):
        self.cost = cost


def _pair(names: list[str], op: str) -> tuple[str, str]:
    if len(names) == 2:
        return names[0], names[1]
    if len(names) == 1:
        return names[0], names[0]
    raise ReasoningError(f"{op} expects two stations, got {len(names)}")


def _single(names: list[str], op: str) -> str:
    if len(names) != 1:
        raise ReasoningError(f"{op} expects one argument, got {len(names)}")
    return names[0]


def _args(value, op: str, kind: str = "station") -> list[str]:
    if not isinstance(value, dict):
        raise ReasoningError(f"{op} expects {kind} arguments from step 0")
    return value.get(kind, [])


def _apply(op: str, extra: tuple[str, ...], value, g: TransitGraph):
    if op == "shortestPath":
        return _PathCost(shortest_path_hops(g, *_pair(_args(value, op), op)))
    if op == "countNodesBetween":
        if isinstance(value, _PathCost):
            return Answer.of_count(max(value.cost - 1, 0))
        return Answer.of_count(count_nodes_between(g, *_pair(_args(value, op), op)))
    if op == "withinHops":
        try:
            k = int(extra[0])
        except (IndexError, ValueError):
            raise ReasoningError(f"withinHops needs an integer hop bound, got {extra!r}")
        return Answer.of_count(within_hops_count(g, _single(_args(value, op), op), k))
    if op == "paths":
        return Answer.of_count(count_simple_paths(g, *_pair(_args(value, op), op)))
    if op == "cycle":
        return Answer.of_bool(on_cycle(g, _single(_args(value, op), op)))
    if op == "adjacent":
        return Answer.of_bool(adjacent(g, *_pair(_args(value, op), op)))
    if op == "adjacentTo":
        return Answer.of_names(common_adjacent_stations(g, *_pair(_args(value, op), op)))
    if op == "commonStation":
        return Answer.of_bool(bool(common_adjacent_stations(g, *_pair(_args(value, op), op))))
    if op == "exist":
        return Answer.of_bool(station_exists(g, _single(_args(value, op), op)))
    if op == "linesOnNames":
        return Answer.of_names(lines_of_station(g, _single(_args(value, op), op)))
    if op == "linesOnCount":
        return Answer.of_count(len(lines_of_station(g, _single(_args(value, op), op))))
    if op == "sameLine":
        return Answer.of_bool(same_line(g, *_pair(_args(value, op), op)))
    if op == "stations":
        return Answer.of_names(stations_of_line(g, _single(_args(value, op, "line"), op)))
    raise ReasoningError(f"unknown op {op!r}")


def evaluate_trace(p: FunctionalProgram, g: TransitGraph) -> tuple[Answer, list[tuple[str, str]]]:
    """Evaluate and also return (atom, value) pairs for each executed step."""
    value: object = {"station": [], "line": []}
    for a in p.arguments:
        value[a.op].append(a.args[0])
    trace = [("step 0", repr(value))]
    try:
        for t in range(1, p.terminal):
            step = p.step_at(t)
            value = _apply(step.op, step.args, value, g)
            shown = value.cost if isinstance(value, _PathCost) else getattr(value, "text", value)
            trace.append((step.atom(), str(shown)))
    except (UnknownStation, UnknownLine, NoPath) as exc:
        trace.append(("error", str(exc)))
        return Answer.unknown(str(exc)), trace
    if isinstance(value, _PathCost):
        value = Answer.of_count(value.cost)
    if not isinstance(value, Answer):
        raise ReasoningError("program produced no answer before end")
    return value, trace


def evaluate(p: FunctionalProgram, g: TransitGraph) -> Answer:
    return evaluate_trace(p, g)[0]


# -- ASP interop -------------------------------------------------------------


def emit_asp_facts(g: TransitGraph, p: FunctionalProgram | None = None) -> str:
    """Render ``g`` (and optionally ``p``) as ASP facts.

    Graph facts go one per line; the question atoms follow on a single
    line in the order end, computation steps, arguments.
    """
    lines = [f'station("{s.name}").' for s in g.stations]
    lines += [f'edge("{e.s1}","{e.s2}",{e.line_id}).' for e in g.edges]
    lines += [f'line({l.id},"{l.name}").' for l in g.lines]
    if p is not None:
        lines.append(p.text(" "))
    return "\n".join(lines) + "\n"


PRIMITIVES: dict[str, Callable] = {
    "shortest_path_hops": shortest_path_hops,
    "count_nodes_between": count_nodes_between,
    "within_hops_count": within_hops_count,
    "count_simple_paths": count_simple_paths,
    "on_cycle": on_cycle,
    "adjacent": adjacent,
    "common_adjacent_stations": common_adjacent_stations,
    "station_exists": station_exists,
    "lines_of_station": lines_of_station,
    "same_line": same_line,
    "stations_of_line": stations_of_line,
}
