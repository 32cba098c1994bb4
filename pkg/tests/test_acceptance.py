"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The reference dataset (100 graphs per size class, 10 questions each) is
built once per session and shared by the criteria that need it.
"""

import random
import time

import pytest

from metrovqa.harness.dataset import SIZE_ORDER, build_dataset, load_manifest, record_questions
from metrovqa.harness.evaluate import run_eval
from metrovqa.graph import load_graph
from metrovqa.nlq.llm import (
    CATEGORIES,
    FIXTURES_PATH,
    build_llm_prompt,
    classify_response,
    load_fixtures,
)
from metrovqa.nlq.templates import TEMPLATES, instantiate_template, parse_question_regex
from metrovqa.program import parse_program
from metrovqa.reasoner import evaluate

from _oracles import compare_primitives
from _util import ACCEPTANCE_LINES, random_edge_graph

COUNTS = {"small": 100, "medium": 100, "large": 100}
QUESTIONS = 10
SEED = 2024

VERBATIM_PRE_PROMPT = (
    "You are now a Question Parser that translates natural language \n"
    "questions into ASP ground truths about different stations. \n"
    "Output only the ground truths and nothing else. The stations to \n"
    "be selected from are arbitrary."
)


def verdict(n, name, ok, detail):
    line = f"criterion {n} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="session")
def reference(tmp_path_factory):
    t0 = time.perf_counter()
    manifest = build_dataset(tmp_path_factory.mktemp("reference"), COUNTS, QUESTIONS, SEED)
    return manifest, time.perf_counter() - t0


@pytest.fixture(scope="session")
def vision_reports(reference):
    manifest, _ = reference
    out = {}
    for mode in ("full", "ocr_gt", "ogr_gt"):
        t0 = time.perf_counter()
        out[mode] = (run_eval(manifest, mode), time.perf_counter() - t0)
    return out


def test_criterion_1_full_gt_exactness(reference):
    manifest, build_s = reference
    t0 = time.perf_counter()
    r = run_eval(manifest, "full_gt", "regex")
    eval_s = time.perf_counter() - t0
    acc = {s: r.accuracy(s) for s in SIZE_ORDER}
    n = r.totals().questions
    ok = all(a == 1.0 for a in acc.values()) and n == 3000 and build_s + eval_s < 120
    detail = ", ".join(f"{s} {a:.3f}" for s, a in acc.items())
    verdict(1, "full-gt exactness", ok, f"{detail}; {n} questions; build {build_s:.1f}s + eval {eval_s:.1f}s")


def test_criterion_2_oracle_equivalence():
    rng = random.Random(20240601)
    t0 = time.perf_counter()
    mismatched = []
    for k in range(1000):
        g, names, raw = random_edge_graph(rng, max_nodes=12, extra=5)
        bad = compare_primitives(g, names, raw)
        if bad:
            mismatched.append((k, bad[:3]))
    elapsed = time.perf_counter() - t0
    ok = not mismatched and elapsed < 60
    verdict(2, "oracle equivalence", ok, f"{1000 - len(mismatched)}/1000 graphs agree; {elapsed:.1f}s"
            + (f"; first mismatch {mismatched[0]}" if mismatched else ""))


def test_criterion_3_vision_round_trip(vision_reports):
    full, elapsed = vision_reports["full"]
    need = {"small": 0.95, "medium": 0.90, "large": 0.85}
    rates = {s: full.round_trip_rate(s) for s in SIZE_ORDER}
    failed = [g for g in full.graphs if not g["exact"]]
    uncaused = [g for g in failed if not g["causes"]]
    acc = [full.accuracy(s) for s in SIZE_ORDER]
    monotone = acc[0] >= acc[1] >= acc[2]
    ok = all(rates[s] >= need[s] for s in SIZE_ORDER) and not uncaused and monotone and elapsed < 600
    detail = ", ".join(f"{s} {rates[s]:.2f} (need {need[s]:.2f})" for s in SIZE_ORDER)
    detail += f"; {len(failed)} failures, {len(uncaused)} without cause"
    detail += f"; full accuracy {acc[0]:.3f} >= {acc[1]:.3f} >= {acc[2]:.3f}; {elapsed:.0f}s"
    verdict(3, "vision round-trip", ok, detail)


def test_criterion_4_ablation_ordering(reference, vision_reports):
    manifest, _ = reference
    acc = {m: r.accuracy() for m, (r, _) in vision_reports.items()}
    acc["full_gt"] = run_eval(manifest, "full_gt").accuracy()
    ok = (acc["full_gt"] >= acc["ocr_gt"] >= acc["full"]
          and acc["full_gt"] >= acc["ogr_gt"] >= acc["full"]
          and acc["ocr_gt"] >= acc["ogr_gt"])
    detail = ", ".join(f"{m} {acc[m]:.3f}" for m in ("full_gt", "ocr_gt", "ogr_gt", "full"))
    verdict(4, "ablation ordering", ok, detail)


def test_criterion_5_language_exactness():
    rng = random.Random(55)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    wrong = []
    total = 0
    for t in TEMPLATES:
        for _ in range(50):
            pool = letters + ("0123456789" if t.id == 8 else "")
            bindings = [rng.choice(letters) + "".join(rng.choice(pool) for _ in range(rng.randint(0, 10)))
                        for _ in range(t.arity)]
            q = instantiate_template(t.id, bindings)
            total += 1
            try:
                if parse_question_regex(q) != t.program(bindings):
                    wrong.append(q)
            except ValueError:
                wrong.append(q)
    verdict(5, "language exactness", not wrong and total == 600,
            f"{total - len(wrong)}/{total} instantiations parsed exactly")


def test_criterion_6_llm_machinery():
    prompt = build_llm_prompt("How many stations are between Leauts and Nily?")
    verbatim = prompt.startswith(VERBATIM_PRE_PROMPT + "\n")
    n_examples = prompt.count('\nQ: "')
    rows = load_fixtures(FIXTURES_PATH)
    agree = sum(classify_response(r["response"], parse_program(r["expected"])).category == r["category"]
                for r in rows)
    coverage = {c: len({r["template_id"] for r in rows if r["category"] == c}) for c in CATEGORIES}
    ok = verbatim and n_examples == 36 and len(rows) >= 24 and agree == len(rows) and min(coverage.values()) >= 6
    verdict(6, "llm machinery", ok,
            f"pre-prompt verbatim {verbatim}; {n_examples} examples; {agree}/{len(rows)} fixtures classified; "
            f"templates per category {coverage}")


def test_criterion_7_reasoning_speed(reference):
    manifest, _ = reference
    m = load_manifest(manifest)
    root = manifest.parent
    elapsed = 0.0
    n = 0
    for rec in m["records"]:
        if rec["size_class"] != "large":
            continue
        g = load_graph((root / rec["graph_file"]).read_text(encoding="utf-8"))
        for q in record_questions(rec):
            t0 = time.perf_counter()
            evaluate(q.gold_program, g)
            elapsed += time.perf_counter() - t0
            n += 1
    avg_ms = 1000 * elapsed / n
    verdict(7, "performance bound", avg_ms < 50 and n == 1000,
            f"{avg_ms:.3f} ms per question over {n} large-graph questions (bound 50 ms)")


def test_criterion_8_determinism(reference, tmp_path):
    manifest, _ = reference
    again = build_dataset(tmp_path / "again", COUNTS, QUESTIONS, SEED)
    same_manifest = manifest.read_bytes() == again.read_bytes()
    images = [r["image_file"] for r in load_manifest(manifest)["records"]]
    differing = [p for p in images if (manifest.parent / p).read_bytes() != (again.parent / p).read_bytes()]
    verdict(8, "determinism", same_manifest and not differing,
            f"manifest identical {same_manifest}; {len(images) - len(differing)}/{len(images)} images identical")
