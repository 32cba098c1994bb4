"""Functional programs (the ASP question atoms) and tagged answers."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from metrovqa.graph import normalize_name

# op -> number of extra (non-index) arguments
COMPUTE_OPS = {
    "countNodesBetween": 0,
    "shortestPath": 0,
    "withinHops": 1,
    "paths": 0,
    "cycle": 0,
    "adjacent": 0,
    "adjacentTo": 0,
    "commonStation": 0,
    "exist": 0,
    "linesOnNames": 0,
    "linesOnCount": 0,
    "sameLine": 0,
    "stations": 0,
}
ARG_OPS = ("station", "line")
END = "end"
ALL_OPS = (END, *COMPUTE_OPS, *ARG_OPS)


class ProgramError(ValueError):
    pass


@dataclass(frozen=True)
class Step:
    index: int
    op: str
    args: tuple[str, ...] = ()

    def atom(self, quote: bool = True) -> str:
        parts = [str(self.index)]
        for a in self.args:
            if self.op in ARG_OPS and quote:
                parts.append(f'"{a}"')
            else:
                parts.append(a)
        return f"{self.op}({','.join(parts)})"


def _order_key(step: Step):
    # end first, then computation steps by descending index, then arguments
    if step.op == END:
        return (0, 0, ())
    if step.index > 0:
        return (1, -step.index, ())
    return (2, 0, ())


class FunctionalProgram:
    """An ordered set of steps with a single terminal ``end(T)``.

    Equality is set equality over atoms: step indices already carry the
    execution order, so atom order in the source text is irrelevant.
    """

    __slots__ = ("steps",)

    def __init__(self, steps: Iterable[Step]):
        steps = list(steps)
        head = sorted((s for s in steps if s.index > 0 or s.op == END), key=_order_key)
        args = [s for s in steps if s.index == 0 and s.op != END]
        self.steps: tuple[Step, ...] = tuple(head + args)
        check_program(self.steps)

    @property
    def terminal(self) -> int:
        return next(s.index for s in self.steps if s.op == END)

    def step_at(self, index: int) -> Step:
        for s in self.steps:
            if s.index == index and s.op != END:
                return s
        raise ProgramError(f"no step at index {index}")

    @property
    def arguments(self) -> list[Step]:
        return [s for s in self.steps if s.index == 0 and s.op in ARG_OPS]

    @property
    def ops(self) -> list[str]:
        """Computation ops in execution order."""
        return [self.step_at(t).op for t in range(1, self.terminal)]

    def atoms(self) -> frozenset[tuple[int, str, tuple[str, ...]]]:
        return frozenset((s.index, s.op, s.args) for s in self.steps)

    def text(self, sep: str = "", quote: bool = True) -> str:
        """``end(3).countNodesBetween(2).shortestPath(1).station(0,"a").station(0,"b").``"""
        return sep.join(s.atom(quote) + "." for s in self.steps)

    def __eq__(self, other):
        if not isinstance(other, FunctionalProgram):
            return NotImplemented
        return self.atoms() == other.atoms()

    def __hash__(self):
        return hash(self.atoms())

    def __repr__(self):
        return f"FunctionalProgram({self.text(' ')!r})"

    def __str__(self):
        return self.text(" ")


def check_program(steps: Sequence[Step]) -> None:
    ends = [s for s in steps if s.op == END]
    if len(ends) != 1:
        raise ProgramError(f"expected exactly one end step, found {len(ends)}")
    T = ends[0].index
    if T < 1:
        raise ProgramError("terminal index must be at least 1")
    seen = set()
    for s in steps:
        if s.op not in ALL_OPS:
            raise ProgramError(f"unknown op {s.op!r}")
        if s.op == END:
            if s.args:
                raise ProgramError("end takes no arguments")
            continue
        if s.op in ARG_OPS:
            if s.index != 0 or len(s.args) != 1:
                raise ProgramError(f"argument atom {s.atom()} must be {s.op}(0,Name)")
            continue
        if not 1 <= s.index < T:
            raise ProgramError(f"step {s.atom()} outside 1..{T - 1}")
        if s.index in seen:
            raise ProgramError(f"two steps at index {s.index}")
        if len(s.args) != COMPUTE_OPS[s.op]:
            raise ProgramError(f"{s.op} takes {COMPUTE_OPS[s.op]} extra argument(s)")
        seen.add(s.index)
    if seen != set(range(1, T)):
        raise ProgramError(f"step indices {sorted(seen)} are not contiguous up to {T - 1}")


# -- atom text parsing -----------------------------------------------------

_ATOM_RE = re.compile(
    r"\b(" + "|".join(sorted(ALL_OPS, key=len, reverse=True)) + r")\s*\(([^()]*)\)"
)
_ARG_RE = re.compile(r"""\s*("[^"]*"|'[^']*'|“[^”]*”|[^,"'“”]+)\s*(?:,|$)""")


def _split_args(raw: str) -> list[str] | None:
    out = []
    pos = 0
    raw = raw.strip()
    while pos < len(raw):
        m = _ARG_RE.match(raw, pos)
        if not m:
            return None
        tok = m.group(1).strip()
        if tok[:1] in "\"'“":
            tok = tok[1:-1]
        out.append(tok)
        pos = m.end()
    return out


def scan_atoms(text: str) -> tuple[list[Step], str]:
    """Find every well-formed atom over the known vocabulary.

    Returns the steps and the residue of ``text`` once atoms and their
    terminating dots are removed.
    """
    steps = []
    residue = []
    last = 0
    for m in _ATOM_RE.finditer(text):
        op, raw = m.group(1), m.group(2)
        args = _split_args(raw)
        if not args or not args[0].strip().isdigit():
            continue
        index = int(args[0])
        rest = args[1:]
        try:
            if op in ARG_OPS:
                rest = [normalize_name(a) for a in rest]
            else:
                rest = [a.strip() for a in rest]
        except ValueError:
            continue
        residue.append(text[last : m.start()])
        last = m.end()
        if text[last : last + 1] == ".":
            last += 1
        steps.append(Step(index, op, tuple(rest)))
    residue.append(text[last:])
    return steps, "".join(residue)


def parse_program(text: str) -> FunctionalProgram:
    """Strict parse: the text must consist of atoms only."""
    steps, residue = scan_atoms(text)
    if residue.strip():
        raise ProgramError(f"unexpected text {residue.strip()[:40]!r}")
    return FunctionalProgram(dict.fromkeys(steps))


# -- answers ---------------------------------------------------------------


@dataclass(frozen=True)
class Answer:
    """Tagged answer: kind is one of bool, count, names, name, unknown."""

    kind: str
    value: Any

    @classmethod
    def of_bool(cls, b: bool) -> "Answer":
        return cls("bool", bool(b))

    @classmethod
    def of_count(cls, n: int) -> "Answer":
        if n < 0:
            raise ValueError("count must be nonnegative")
        return cls("count", int(n))

    @classmethod
    def of_names(cls, names: Iterable[str]) -> "Answer":
        return cls("names", tuple(sorted(set(names))))

    @classmethod
    def of_name(cls, name: str) -> "Answer":
        return cls("name", name)

    @classmethod
    def unknown(cls, reason: str) -> "Answer":
        return cls("unknown", reason)

    @property
    def text(self) -> str:
        if self.kind == "bool":
            return "yes" if self.value else "no"
        if self.kind == "count":
            return str(self.value)
        if self.kind == "names":
            return ",".join(self.value)
        if self.kind == "name":
            return self.value
        return "unknown"

    def to_json(self) -> dict:
        v = list(self.value) if self.kind == "names" else self.value
        return {"kind": self.kind, "value": v}

    @classmethod
    def from_json(cls, d: dict) -> "Answer":
        if d["kind"] == "names":
            return cls.of_names(d["value"])
        return cls(d["kind"], d["value"])


def grade(predicted: Answer, gold: Answer) -> bool:
    if predicted.kind == "unknown" or gold.kind == "unknown":
        return False
    return predicted.text == gold.text
