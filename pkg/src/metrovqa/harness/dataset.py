"""Build an on-disk benchmark: graphs, rendered images, sidecars, questions, manifest."""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Mapping

from metrovqa.generator import (
    GenerationError,
    LayoutError,
    QuestionInstance,
    generate_graph,
    layout_graph,
    make_questions,
)
from metrovqa.graph import TransitGraph, save_graph
from metrovqa.render import RenderError, render, save_png
from metrovqa.style import DEFAULT_STYLE, StyleSpec, canvas_size

log = logging.getLogger(__name__)

SIZE_ORDER = ("small", "medium", "large")
LAYOUT_ATTEMPTS = 30
RESEEDS = 10


def derive_seed(*parts) -> int:
    digest = hashlib.sha256(":".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def render_graph(g: TransitGraph, seed: int, width: int, style: StyleSpec = DEFAULT_STYLE,
                 attempts: int = LAYOUT_ATTEMPTS):
    """Lay out and render ``g``, trying fresh layout seeds until labels fit.

    Returns (layout, image, sidecar, layout_seed); raises LayoutError when
    every attempt fails.
    """
    for a in range(attempts):
        layout_seed = derive_seed(seed, "layout", a) % (2**31)
        try:
            layout = layout_graph(g, layout_seed, width)
            img, sidecar = render(g, layout, style)
        except (LayoutError, RenderError) as exc:
            log.info("seed %d layout %d rejected: %s", seed, a, exc)
            continue
        return layout, img, sidecar, layout_seed
    raise LayoutError(f"no usable layout after {attempts} attempts")


def default_width(g: TransitGraph) -> int:
    return canvas_size("large" if len(g.stations) > 18 else "small")


def draw_instance(size: str, seed: int, style: StyleSpec = DEFAULT_STYLE):
    """Generate, lay out and render one graph, reseeding on layout exhaustion.

    Returns (graph, layout, image, sidecar, graph_seed, layout_seed).
    """
    for r in range(RESEEDS):
        graph_seed = seed if r == 0 else derive_seed(seed, "reseed", r)
        g = generate_graph(size, graph_seed)
        try:
            layout, img, sidecar, layout_seed = render_graph(g, graph_seed, canvas_size(size), style)
        except LayoutError:
            log.warning("%s graph seed %d: layout exhausted, reseeding", size, graph_seed)
            continue
        return g, layout, img, sidecar, graph_seed, layout_seed
    raise GenerationError(f"no renderable {size} graph from seed {seed}")


def build_dataset(out_dir: str | Path, counts: Mapping[str, int], questions_per_graph: int = 10,
                  seed: int = 0, style: StyleSpec = DEFAULT_STYLE) -> Path:
    out = Path(out_dir)
    for sub in ("graphs", "images", "sidecars"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    records = []
    for size in SIZE_ORDER:
        for i in range(counts.get(size, 0)):
            base = derive_seed(seed, size, i)
            g, layout, img, sidecar, graph_seed, layout_seed = draw_instance(size, base, style)
            stem = f"{size}_{i:03d}"
            (out / "graphs" / f"{stem}.json").write_text(save_graph(g), encoding="utf-8")
            save_png(img, out / "images" / f"{stem}.png")
            sidecar = dict(sidecar, layout=layout.to_json())
            (out / "sidecars" / f"{stem}.json").write_text(json.dumps(sidecar, indent=1) + "\n", encoding="utf-8")
            questions = make_questions(g, questions_per_graph, derive_seed(seed, "q", size, i))
            records.append({
                "graph_file": f"graphs/{stem}.json",
                "image_file": f"images/{stem}.png",
                "sidecar_file": f"sidecars/{stem}.json",
                "size_class": size,
                "seed": graph_seed,
                "layout_seed": layout_seed,
                "questions": [q.to_json() for q in questions],
            })
            log.debug("built %s (%d stations)", stem, len(g.stations))
    manifest = {
        "seed": seed,
        "counts": {s: counts.get(s, 0) for s in SIZE_ORDER},
        "questions_per_graph": questions_per_graph,
        "records": records,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    return path


def load_manifest(path: str | Path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    manifest = json.loads(path.read_text(encoding="utf-8"))
    manifest["_root"] = str(path.parent)
    return manifest


def manifest_digest(path: str | Path) -> str:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    return hashlib.sha256(path.read_bytes()).hexdigest()


def record_questions(record: dict) -> list[QuestionInstance]:
    return [QuestionInstance.from_json(q) for q in record["questions"]]
