"""Ablation evaluation over a built dataset.

Each record's graph is obtained according to the mode, every question is
parsed, evaluated and graded, and results are aggregated per size class and
template. Parse time covers image parsing and question parsing; reasoning time
covers program evaluation only.
"""

from __future__ import annotations

import json
import logging
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from metrovqa.graph import TransitGraph, graph_equivalent, graph_from_dict
from metrovqa.harness.dataset import SIZE_ORDER, load_manifest, manifest_digest, record_questions
from metrovqa.nlq.llm import ChatClient, LlmConfig, LlmError, llm_parse
from metrovqa.nlq.templates import NoTemplateMatch, parse_question_regex
from metrovqa.program import FunctionalProgram, grade
from metrovqa.reasoner import evaluate
from metrovqa.render import build_glyph_atlas, load_png
from metrovqa.style import DEFAULT_STYLE, StyleSpec
from metrovqa.vision import (
    DetectedEdge,
    DetectedLabel,
    DetectedNode,
    RecoveredGraph,
    associate_labels,
    classify_pixels,
    detect_edges,
    detect_nodes,
    diagnose,
    ocr_labels,
    read_legend,
    recover,
)

log = logging.getLogger(__name__)

MODES = ("full", "ocr_gt", "ogr_gt", "full_gt")
PARSERS = ("regex", "llm", "fallback")


@dataclass
class Cell:
    questions: int = 0
    correct: int = 0

    @property
    def accuracy(self) -> float:
        return self.correct / self.questions if self.questions else 0.0


@dataclass
class EvalReport:
    mode: str
    parser: str = "regex"
    dataset_digest: str = ""
    # size class -> template id -> Cell
    cells: dict[str, dict[int, Cell]] = field(default_factory=dict)
    parse_time: dict[str, float] = field(default_factory=dict)
    reasoning_time: dict[str, float] = field(default_factory=dict)
    failures: list[dict] = field(default_factory=list)
    # one entry per record whose graph came from vision: exactness and causes
    graphs: list[dict] = field(default_factory=list)

    def add(self, size: str, template_id: int, correct: bool) -> None:
        cell = self.cells.setdefault(size, {}).setdefault(template_id, Cell())
        cell.questions += 1
        cell.correct += int(correct)

    def totals(self, size: str | None = None, template_id: int | None = None) -> Cell:
        out = Cell()
        for s, row in self.cells.items():
            if size is not None and s != size:
                continue
            for t, c in row.items():
                if template_id is not None and t != template_id:
                    continue
                out.questions += c.questions
                out.correct += c.correct
        return out

    def accuracy(self, size: str | None = None, template_id: int | None = None) -> float:
        return self.totals(size, template_id).accuracy

    def total_parse_time(self, size: str | None = None) -> float:
        return sum(v for s, v in self.parse_time.items() if size in (None, s))

    def total_reasoning_time(self, size: str | None = None) -> float:
        return sum(v for s, v in self.reasoning_time.items() if size in (None, s))

    def merge(self, other: "EvalReport") -> "EvalReport":
        """Combine two partial reports; the operation is commutative."""
        out = EvalReport(self.mode, self.parser, self.dataset_digest or other.dataset_digest)
        for r in (self, other):
            for s, row in r.cells.items():
                for t, c in row.items():
                    cell = out.cells.setdefault(s, {}).setdefault(t, Cell())
                    cell.questions += c.questions
                    cell.correct += c.correct
            for s, v in r.parse_time.items():
                out.parse_time[s] = out.parse_time.get(s, 0.0) + v
            for s, v in r.reasoning_time.items():
                out.reasoning_time[s] = out.reasoning_time.get(s, 0.0) + v
        out.failures = sorted(self.failures + other.failures,
                              key=lambda f: (f["record"], f["question"]))
        out.graphs = sorted(self.graphs + other.graphs, key=lambda r: r["record"])
        return out

    def round_trip_rate(self, size: str | None = None) -> float:
        rows = [r for r in self.graphs if size in (None, r["size"])]
        return sum(r["exact"] for r in rows) / len(rows) if rows else 0.0

    def cause_counts(self) -> Counter:
        return Counter(f["cause"].split(":")[0] for f in self.failures)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "parser": self.parser,
            "dataset_digest": self.dataset_digest,
            "cells": {s: {str(t): [c.questions, c.correct] for t, c in sorted(row.items())}
                      for s, row in sorted(self.cells.items())},
            "parse_time": dict(sorted(self.parse_time.items())),
            "reasoning_time": dict(sorted(self.reasoning_time.items())),
            "failures": self.failures,
            "graphs": self.graphs,
        }

    @classmethod
    def from_json(cls, d: dict) -> "EvalReport":
        cells = {s: {int(t): Cell(q, c) for t, (q, c) in row.items()} for s, row in d["cells"].items()}
        return cls(d["mode"], d["parser"], d["dataset_digest"], cells,
                   dict(d["parse_time"]), dict(d["reasoning_time"]), list(d["failures"]),
                   list(d.get("graphs", [])))

    def __eq__(self, other):
        if not isinstance(other, EvalReport):
            return NotImplemented
        return self.to_json() == other.to_json()


# -- graph acquisition per mode --------------------------------------------


def _gt_labels(sidecar: dict) -> list[DetectedLabel]:
    return [DetectedLabel(l["text"], tuple(l["box"]), 1.0) for l in sidecar["labels"]]


def _gt_legend(sidecar: dict) -> dict:
    rows = (sidecar.get("legend") or {"rows": []})["rows"]
    return {tuple(r["color"]): r["name"] for r in rows}


def _gt_structure(sidecar: dict, style: StyleSpec) -> tuple[list[DetectedNode], list[DetectedEdge]]:
    order = {n["name"]: k for k, n in enumerate(sidecar["nodes"])}
    nodes = [DetectedNode(tuple(float(v) for v in n["center"]), float(style.node_radius))
             for n in sidecar["nodes"]]
    colors = {l["id"]: tuple(l["color"]) for l in sidecar["graph"]["lines"]}
    edges = []
    for e in sidecar["graph"]["edges"]:
        i, j = sorted((order[e["s1"]], order[e["s2"]]))
        edges.append(DetectedEdge(i, j, colors[e["line_id"]], 1.0))
    return nodes, edges


def graph_for_mode(img, sidecar: dict, mode: str, atlas=None,
                   style: StyleSpec = DEFAULT_STYLE) -> tuple[TransitGraph, RecoveredGraph | None]:
    """The graph the reasoner sees under ``mode``, plus the recovery it came from."""
    if mode == "full_gt":
        return graph_from_dict(sidecar["graph"], validate=False), None
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    atlas = atlas or build_glyph_atlas(style)
    if mode == "full":
        rec = recover(img, atlas, style=style)
        return rec.to_transit_graph(), rec
    classes = classify_pixels(img, style)
    warnings: list[str] = []
    if mode == "ocr_gt":
        nodes, edges = _gt_structure(sidecar, style)
        labels = ocr_labels(img, atlas, style, classes=classes)
        legend, used = read_legend(img, atlas, style, labels, classes)
        labels = [l for k, l in enumerate(labels) if k not in used]
    else:  # ogr_gt
        nodes = detect_nodes(img, style, warnings, classes)
        edges = detect_edges(img, nodes, style.palette, style, warnings=warnings)
        labels = _gt_labels(sidecar)
        legend = _gt_legend(sidecar)
    names = associate_labels(nodes, labels)
    rec = RecoveredGraph(nodes, names, edges, legend, labels, warnings)
    return rec.to_transit_graph(), rec


# -- question parsing --------------------------------------------------------


class QuestionParser:
    def __init__(self, kind: str = "regex", llm: LlmConfig | None = None):
        if kind not in PARSERS:
            raise ValueError(f"unknown parser {kind!r}")
        if kind != "regex" and llm is None:
            raise ValueError(f"parser {kind!r} needs an LLM configuration")
        self.kind = kind
        self.llm = llm
        self._client = ChatClient(llm) if llm is not None else None

    def __call__(self, question: str) -> FunctionalProgram:
        if self.kind == "llm":
            return llm_parse(question, self.llm, self._client)
        try:
            return parse_question_regex(question)
        except NoTemplateMatch:
            if self.kind == "fallback":
                return llm_parse(question, self.llm, self._client)
            raise


# -- evaluation ---------------------------------------------------------------


def _eval_record(args) -> EvalReport:
    root, idx, record, mode, parser_kind, llm, style = args
    root = Path(root)
    size = record["size_class"]
    parse = QuestionParser(parser_kind, llm)
    report = EvalReport(mode, parser_kind)
    sidecar = json.loads((root / record["sidecar_file"]).read_text(encoding="utf-8"))
    img = load_png(root / record["image_file"]) if mode != "full_gt" else None

    t0 = time.perf_counter()
    g, rec = graph_for_mode(img, sidecar, mode, style=style)
    parse_t = time.perf_counter() - t0
    graph_causes = []
    if rec is not None:
        exact = graph_equivalent(g, graph_from_dict(sidecar["graph"], validate=False))
        graph_causes = diagnose(rec, sidecar)
        if not exact and not graph_causes:
            graph_causes = ["unattributed: recovered graph differs from source"]
        for c in graph_causes:
            log.info("record %d (%s): %s", idx, size, c)
        report.graphs.append({"record": idx, "size": size, "exact": exact, "causes": graph_causes})
    reason_t = 0.0

    for qi, q in enumerate(record_questions(record)):
        t0 = time.perf_counter()
        try:
            program = parse(q.surface_text)
        except (NoTemplateMatch, LlmError) as exc:
            parse_t += time.perf_counter() - t0
            report.add(size, q.template_id, False)
            report.failures.append({"record": idx, "question": qi, "cause": f"parse-miss: {exc}"})
            continue
        parse_t += time.perf_counter() - t0
        t0 = time.perf_counter()
        answer = evaluate(program, g)
        reason_t += time.perf_counter() - t0
        ok = grade(answer, q.gold_answer)
        report.add(size, q.template_id, ok)
        if not ok:
            if program != q.gold_program:
                cause = "parse-miss: program differs from gold"
            elif graph_causes:
                cause = graph_causes[0]
            else:
                cause = f"reasoning: got {answer.text}, expected {q.gold_answer.text}"
            report.failures.append({"record": idx, "question": qi, "cause": cause})
    report.parse_time[size] = parse_t
    report.reasoning_time[size] = reason_t
    return report


def run_eval(manifest_path: str | Path, mode: str = "full", parser: str = "regex",
             llm: LlmConfig | None = None, workers: int = 1,
             style: StyleSpec = DEFAULT_STYLE) -> EvalReport:
    """Evaluate every question of the dataset under one ablation mode.

    Records are independent, so with ``workers > 1`` they are spread over a
    process pool; the merged report does not depend on completion order.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    QuestionParser(parser, llm)  # validate configuration up front
    manifest = load_manifest(manifest_path)
    root = manifest["_root"]
    jobs = [(root, i, r, mode, parser, llm, style) for i, r in enumerate(manifest["records"])]
    report = EvalReport(mode, parser, manifest_digest(manifest_path))
    for s in SIZE_ORDER:
        if manifest["counts"].get(s):
            report.cells.setdefault(s, {})
            report.parse_time.setdefault(s, 0.0)
            report.reasoning_time.setdefault(s, 0.0)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_eval_record, jobs, chunksize=max(1, math.ceil(len(jobs) / (4 * workers)))))
    else:
        parts = [_eval_record(j) for j in jobs]
    for part in parts:
        report = report.merge(part)
    return report
