"""Accuracy and timing summaries of evaluation reports: text, delimited file, JSON, figure."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

from metrovqa.harness.dataset import SIZE_ORDER
from metrovqa.harness.evaluate import MODES, EvalReport

ROWS = (*SIZE_ORDER, "overall")


def _ordered(reports: Sequence[EvalReport]) -> list[EvalReport]:
    rank = {m: k for k, m in enumerate(MODES)}
    return sorted(reports, key=lambda r: (rank.get(r.mode, len(MODES)), r.mode, r.parser))


def _column(r: EvalReport) -> str:
    return r.mode if r.parser == "regex" else f"{r.mode}/{r.parser}"


def table_rows(reports: Sequence[EvalReport]) -> tuple[list[str], list[list[str]]]:
    """Header and body of the accuracy/timing grid; an empty input gives all-zero rows."""
    reports = _ordered(reports)
    if not reports:
        reports = [EvalReport(m) for m in MODES]
    header = ["size"]
    for r in reports:
        c = _column(r)
        header += [f"{c} acc", f"{c} parse s", f"{c} reason s"]
    body = []
    for row in ROWS:
        size = None if row == "overall" else row
        line = [row]
        for r in reports:
            line += [f"{r.accuracy(size):.3f}", f"{r.total_parse_time(size):.3f}",
                     f"{r.total_reasoning_time(size):.3f}"]
        body.append(line)
    return header, body


def format_table(reports: Sequence[EvalReport]) -> str:
    header, body = table_rows(reports)
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    fmt = lambda cells: "  ".join(c.rjust(w) if k else c.ljust(w) for k, (c, w) in enumerate(zip(cells, widths)))
    lines = [fmt(header), "  ".join("-" * w for w in widths)]
    lines += [fmt(b) for b in body]
    return "\n".join(lines)


def to_delimited(reports: Sequence[EvalReport], delimiter: str = ",") -> str:
    header, body = table_rows(reports)
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(header)
    w.writerows(body)
    return buf.getvalue()


def reports_to_json(reports: Sequence[EvalReport]) -> str:
    return json.dumps([r.to_json() for r in _ordered(reports)], indent=1) + "\n"


def reports_from_json(text: str) -> list[EvalReport]:
    return [EvalReport.from_json(d) for d in json.loads(text)]


def plot_accuracy(reports: Sequence[EvalReport], path: str | Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    reports = _ordered(reports)
    fig, ax = plt.subplots(figsize=(7, 4))
    n = max(1, len(reports))
    width = 0.8 / n
    for k, r in enumerate(reports):
        xs = [i + (k - (n - 1) / 2) * width for i in range(len(ROWS))]
        ax.bar(xs, [r.accuracy(None if row == "overall" else row) for row in ROWS], width, label=_column(r))
    ax.set_xticks(range(len(ROWS)), ROWS)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    if reports:
        ax.legend(loc="lower left", fontsize="small")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def write_report(reports: Sequence[EvalReport], out_dir: str | Path, delimiter: str = ",") -> dict[str, Path]:
    """Write the text table, delimited table, JSON and figure; return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = "tsv" if delimiter == "\t" else "csv"
    paths = {
        "table": out / "report.txt",
        ext: out / f"report.{ext}",
        "json": out / "report.json",
    }
    paths["table"].write_text(format_table(reports) + "\n", encoding="utf-8")
    paths[ext].write_text(to_delimited(reports, delimiter), encoding="utf-8")
    paths["json"].write_text(reports_to_json(reports), encoding="utf-8")
    paths["figure"] = plot_accuracy(reports, out / "accuracy.png")
    return paths
