"""The twelve image-answerable question templates and the regex parser."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from metrovqa.graph import normalize_name
from metrovqa.program import FunctionalProgram, Step


class NoTemplateMatch(ValueError):
    pass


@dataclass(frozen=True)
class Template:
    id: int
    pattern: str
    # computation steps in execution order (op, extra args); step 1 first
    ops: tuple[tuple[str, tuple[str, ...]], ...]
    arg_kind: str
    arity: int
    surface: str
    answer_kind: str

    @property
    def regex(self) -> re.Pattern:
        # the trailing "?" is the question mark, not a quantifier
        return re.compile(self.pattern[:-1] + r"\?")

    def program(self, bindings: Sequence[str]) -> FunctionalProgram:
        if len(bindings) != self.arity:
            raise ValueError(f"template {self.id} takes {self.arity} binding(s), got {len(bindings)}")
        steps = [Step(len(self.ops) + 1, "end")]
        steps += [Step(i + 1, op, extra) for i, (op, extra) in enumerate(self.ops)]
        steps += [Step(0, self.arg_kind, (normalize_name(b),)) for b in bindings]
        return FunctionalProgram(steps)


_N = "([a-zA-Z]+)"

TEMPLATES: tuple[Template, ...] = (
    Template(1, f"How many stations are between {_N} and {_N}?",
             (("shortestPath", ()), ("countNodesBetween", ())), "station", 2,
             "How many stations are between {} and {}?", "count"),
    Template(2, f"How many other stations are two stops or closer to {_N}?",
             (("withinHops", ("2",)),), "station", 1,
             "How many other stations are two stops or closer to {}?", "count"),
    Template(3, f"How many distinct routes are there between {_N} and {_N}?",
             (("paths", ()),), "station", 2,
             "How many distinct routes are there between {} and {}?", "count"),
    Template(4, f"Is {_N} part of a cycle?",
             (("cycle", ()),), "station", 1,
             "Is {} part of a cycle?", "bool"),
    Template(5, f"Are {_N} and {_N} adjacent?",
             (("adjacent", ()),), "station", 2,
             "Are {} and {} adjacent?", "bool"),
    Template(6, f"Which station is adjacent to {_N} and {_N}?",
             (("adjacentTo", ()),), "station", 2,
             "Which station is adjacent to {} and {}?", "names"),
    Template(7, f"Are {_N} and {_N} connected by the same station?",
             (("commonStation", ()),), "station", 2,
             "Are {} and {} connected by the same station?", "bool"),
    Template(8, "Is there a station called ([a-zA-Z0-9]+)?",
             (("exist", ()),), "station", 1,
             "Is there a station called {}?", "bool"),
    Template(9, f"Which lines is {_N} on?",
             (("linesOnNames", ()),), "station", 1,
             "Which lines is {} on?", "names"),
    Template(10, f"How many lines is {_N} on?",
             (("linesOnCount", ()),), "station", 1,
             "How many lines is {} on?", "count"),
    Template(11, f"Are {_N} and {_N} on the same line?",
             (("sameLine", ()),), "station", 2,
             "Are {} and {} on the same line?", "bool"),
    Template(12, f"Which stations does {_N} pass through?",
             (("stations", ()),), "line", 1,
             "Which stations does {} pass through?", "names"),
)

BY_ID = {t.id: t for t in TEMPLATES}


def get_template(template_id: int) -> Template:
    try:
        return BY_ID[template_id]
    except KeyError:
        raise ValueError(f"no template {template_id}") from None


def match_template(q: str) -> tuple[Template, list[str]]:
    q = " ".join(q.split())
    for t in TEMPLATES:
        m = t.regex.fullmatch(q)
        if m:
            return t, list(m.groups())
    raise NoTemplateMatch(f"no template matched {q!r}")


def parse_question_regex(q: str) -> FunctionalProgram:
    t, names = match_template(q)
    return t.program(names)


def instantiate_template(template_id: int, bindings: Sequence[str]) -> str:
    t = get_template(template_id)
    if len(bindings) != t.arity:
        raise ValueError(f"template {t.id} takes {t.arity} binding(s), got {len(bindings)}")
    return t.surface.format(*bindings)


def template_of_program(p: FunctionalProgram) -> int | None:
    ops = [(s.op, s.args) for s in (p.step_at(i) for i in range(1, p.terminal))]
    for t in TEMPLATES:
        if list(t.ops) == ops:
            return t.id
    return None
