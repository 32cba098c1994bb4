"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 transport error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from metrovqa.graph import GraphError, TransitGraph, load_graph, save_graph
from metrovqa.harness.dataset import SIZE_ORDER, build_dataset, default_width, render_graph
from metrovqa.harness.evaluate import MODES, PARSERS, run_eval
from metrovqa.harness.report import format_table, reports_from_json, reports_to_json, write_report
from metrovqa.nlq.llm import CredentialMissing, LlmConfig, LlmError, TransportFailure, llm_parse
from metrovqa.nlq.templates import NoTemplateMatch, parse_question_regex
from metrovqa.program import FunctionalProgram, ProgramError
from metrovqa.reasoner import evaluate_trace
from metrovqa.render import load_png, save_png
from metrovqa.style import canvas_size
from metrovqa.vision import dump_masks, recover

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRANSPORT = 0, 1, 2, 3

NO_LLM = "no template matched; LLM parser not configured"


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _llm_config(args) -> LlmConfig | None:
    if not (args.llm_endpoint or args.llm_model or args.fixtures):
        return None
    kw = {}
    if args.llm_endpoint:
        kw["endpoint"] = args.llm_endpoint
    if args.llm_model:
        kw["model"] = args.llm_model
    if args.fixtures:
        kw["fixtures"] = args.fixtures
    if args.api_key_env:
        kw["api_key_env"] = args.api_key_env
    return LlmConfig(**kw)


def parse_question(text: str, parser: str, llm: LlmConfig | None) -> FunctionalProgram:
    """Parse with the requested strategy; failures name what was tried."""
    if parser == "llm":
        if llm is None:
            raise DataError("LLM parser not configured")
        return llm_parse(text, llm)
    try:
        return parse_question_regex(text)
    except NoTemplateMatch:
        if parser == "regex":
            raise DataError("no template matched; parser is regex only")
        if llm is None:
            raise DataError(NO_LLM)
        try:
            return llm_parse(text, llm)
        except LlmError as exc:
            if isinstance(exc, (TransportFailure, CredentialMissing)):
                raise
            raise DataError(f"no template matched; LLM fallback failed: {exc}") from exc


def load_input(path: str, debug_masks: str | None = None) -> TransitGraph:
    p = Path(path)
    if not p.exists():
        raise DataError(f"{path}: no such file")
    if p.suffix.lower() == ".png":
        try:
            img = load_png(p)
        except OSError as exc:
            raise DataError(f"{path}: unreadable image: {exc}") from exc
        if debug_masks:
            dump_masks(img, debug_masks)
        rec = recover(img)
        for w in rec.warnings:
            logging.getLogger("metrovqa").warning(w)
        return rec.to_transit_graph()
    try:
        return load_graph(p.read_text(encoding="utf-8"), validate=False)
    except (GraphError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def _answer(g: TransitGraph, question: str, args, llm, out) -> None:
    program = parse_question(question, args.parser, llm)
    answer, trace = evaluate_trace(program, g)
    if args.explain:
        print(f"program: {program.text()}", file=out)
        for atom, value in trace:
            print(f"  {atom} -> {value}", file=out)
    print(answer.text, file=out)


# -- subcommands ---------------------------------------------------------------


def cmd_generate(args) -> int:
    sizes = SIZE_ORDER if args.size == "all" else (args.size,)
    counts = {s: args.count for s in sizes}
    path = build_dataset(args.out, counts, args.questions, args.seed)
    print(path)
    return EXIT_OK


def cmd_render(args) -> int:
    g = load_input(args.graph)
    width = canvas_size(args.size) if args.size else default_width(g)
    layout, img, sidecar, layout_seed = render_graph(g, args.seed, width)
    out = Path(args.out)
    save_png(img, out)
    sidecar_path = out.with_suffix(".sidecar.json")
    sidecar_path.write_text(json.dumps(dict(sidecar, layout=layout.to_json()), indent=1) + "\n", encoding="utf-8")
    print(out)
    return EXIT_OK


def cmd_parse_image(args) -> int:
    g = load_input(args.image, args.debug_masks)
    text = save_graph(g)
    for v in g.violations:
        print(f"violation: {v}", file=sys.stderr)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_parse_question(args) -> int:
    print(parse_question(args.question, args.parser, _llm_config(args)).text())
    return EXIT_OK


def cmd_ask(args) -> int:
    g = load_input(args.input, args.debug_masks)
    _answer(g, args.question, args, _llm_config(args), sys.stdout)
    return EXIT_OK


def cmd_repl(args) -> int:
    g = load_input(args.input, args.debug_masks)
    llm = _llm_config(args)
    status = EXIT_OK
    for line in sys.stdin:
        q = line.strip()
        if not q:
            continue
        try:
            _answer(g, q, args, llm, sys.stdout)
        except DataError as exc:
            print(f"error: {exc}", file=sys.stderr)
            status = EXIT_DATA
        sys.stdout.flush()
    return status


def cmd_evaluate(args) -> int:
    modes = MODES if args.mode == "all" else (args.mode,)
    reports = [run_eval(args.manifest, m, args.parser, _llm_config(args), args.workers) for m in modes]
    print(format_table(reports))
    if args.out:
        Path(args.out).write_text(reports_to_json(reports), encoding="utf-8")
    return EXIT_OK


def cmd_report(args) -> int:
    reports = []
    for path in args.reports:
        try:
            reports += reports_from_json(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"{path}: {exc}") from exc
    print(format_table(reports))
    if args.out:
        paths = write_report(reports, args.out, "\t" if args.tsv else ",")
        for p in paths.values():
            print(p, file=sys.stderr)
    return EXIT_OK


def _add_llm_flags(p) -> None:
    p.add_argument("--parser", choices=PARSERS, default="fallback")
    p.add_argument("--llm-endpoint")
    p.add_argument("--llm-model")
    p.add_argument("--fixtures", help="replay recorded transcripts instead of calling the endpoint")
    p.add_argument("--api-key-env", help="environment variable holding the API key")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="metrovqa", description="Visual question answering over rendered transit maps.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="build a dataset of graphs, images and questions")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", choices=(*SIZE_ORDER, "all"), default="all")
    p.add_argument("--count", type=int, default=100, help="graphs per size class")
    p.add_argument("--questions", type=int, default=10, help="questions per graph")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("render", help="render a graph file to PNG plus sidecar")
    p.add_argument("graph")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", choices=SIZE_ORDER)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("parse-image", help="recover a graph file from a rendered image")
    p.add_argument("image")
    p.add_argument("--out")
    p.add_argument("--debug-masks", metavar="DIR")
    p.set_defaults(func=cmd_parse_image)

    p = sub.add_parser("parse-question", help="print the functional program of a question")
    p.add_argument("question")
    _add_llm_flags(p)
    p.set_defaults(func=cmd_parse_question)

    for name, func in (("ask", cmd_ask), ("repl", cmd_repl)):
        p = sub.add_parser(name, help="answer a question" if name == "ask" else "answer questions from stdin")
        p.add_argument("input", help="graph file (.json) or rendered image (.png)")
        if name == "ask":
            p.add_argument("question")
        p.add_argument("--explain", action="store_true")
        p.add_argument("--debug-masks", metavar="DIR")
        _add_llm_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("evaluate", help="run an ablation evaluation over a dataset")
    p.add_argument("manifest")
    p.add_argument("--mode", choices=(*MODES, "all"), default="full")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="write the machine-readable report here")
    _add_llm_flags(p)
    p.set_defaults(func=cmd_evaluate, parser="regex")

    p = sub.add_parser("report", help="tabulate and plot saved evaluation reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", metavar="DIR", help="write table, CSV, JSON and figure here")
    p.add_argument("--tsv", action="store_true")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TransportFailure, CredentialMissing) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (DataError, GraphError, ProgramError, LlmError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
