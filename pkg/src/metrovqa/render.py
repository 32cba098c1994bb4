"""Deterministic rasterizer: hard-edged strokes, disks, bitmap-font labels and a legend.

Images are ``(height, width, 3)`` uint8 arrays. No anti-aliasing is ever
applied, so every pixel carries exactly one of the style's colors.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from metrovqa.font import CHARSET, GLYPH_H, GLYPH_W, SPACING, glyph_bitmap, text_bitmap
from metrovqa.generator import Layout
from metrovqa.graph import Line, TransitGraph, graph_to_dict
from metrovqa.style import DEFAULT_STYLE, StyleSpec

ANCHORS = ("E", "NE", "N", "NW", "W", "SW", "S", "SE")

LEGEND_TOP_GAP = 12
LEGEND_ROW_H = 24
LEGEND_SWATCH = (32, 14)  # width, height
LEGEND_X = 16
LEGEND_TEXT_X = LEGEND_X + LEGEND_SWATCH[0] + 12


class RenderError(RuntimeError):
    pass


class UnplaceableLabel(RenderError):
    def __init__(self, station: str):
        super().__init__(f"no collision-free label position for station {station!r}")
        self.station = station


def build_glyph_atlas(style: StyleSpec = DEFAULT_STYLE) -> dict[str, np.ndarray]:
    return {ch: glyph_bitmap(ch, style.label_scale) for ch in CHARSET}


def label_size(text: str, style: StyleSpec) -> tuple[int, int]:
    s = style.label_scale
    return ((GLYPH_W + SPACING) * s * len(text) - SPACING * s, GLYPH_H * s)


def draw_disk(img: np.ndarray, center, radius: int, color) -> None:
    cx, cy = center
    y0, y1 = max(cy - radius, 0), min(cy + radius + 1, img.shape[0])
    x0, x1 = max(cx - radius, 0), min(cx + radius + 1, img.shape[1])
    yy, xx = np.mgrid[y0:y1, x0:x1]
    mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius * radius
    img[y0:y1, x0:x1][mask] = color


def draw_segment(img: np.ndarray, a, b, width: float, color) -> None:
    half = width / 2
    (ax, ay), (bx, by) = a, b
    pad = int(math.ceil(half)) + 1
    x0, x1 = max(min(ax, bx) - pad, 0), min(max(ax, bx) + pad + 1, img.shape[1])
    y0, y1 = max(min(ay, by) - pad, 0), min(max(ay, by) + pad + 1, img.shape[0])
    yy, xx = np.mgrid[y0:y1, x0:x1].astype(float)
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy or 1.0
    t = np.clip(((xx - ax) * dx + (yy - ay) * dy) / L2, 0.0, 1.0)
    d2 = (xx - ax - t * dx) ** 2 + (yy - ay - t * dy) ** 2
    img[y0:y1, x0:x1][d2 <= half * half] = color


def draw_text(img: np.ndarray, text: str, origin, style: StyleSpec) -> tuple[int, int, int, int]:
    x, y = origin
    bm = text_bitmap(text, style.label_scale)
    h, w = bm.shape
    img[y : y + h, x : x + w][bm] = style.label_color
    return (x, y, x + w, y + h)


# -- geometry helpers for label placement ----------------------------------


def _segment_hits_box(a, b, box) -> bool:
    """Liang-Barsky clip of segment ab against the closed box."""
    x0, y0, x1, y1 = box
    (ax, ay), (bx, by) = a, b
    dx, dy = bx - ax, by - ay
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, ax - x0), (dx, x1 - ax), (-dy, ay - y0), (dy, y1 - ay)):
        if p == 0:
            if q < 0:
                return False
            continue
        r = q / p
        if p < 0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 > t1:
            return False
    return True


def _box_point_distance(box, p) -> float:
    x0, y0, x1, y1 = box
    px, py = p
    dx = max(x0 - px, 0, px - x1)
    dy = max(y0 - py, 0, py - y1)
    return math.hypot(dx, dy)


def _boxes_overlap(a, b, gap) -> bool:
    return not (a[2] + gap <= b[0] or b[2] + gap <= a[0] or a[3] + gap <= b[1] or b[3] + gap <= a[1])


LABEL_RINGS = 3
RING_STEP = 12


def candidate_origin(anchor: str, center, size, style: StyleSpec, ring: int = 0) -> tuple[int, int]:
    cx, cy = center
    w, h = size
    d = style.node_radius + style.label_offset + ring * RING_STEP
    diag = int(round(d * 0.75))
    return {
        "E": (cx + d, cy - h // 2),
        "NE": (cx + diag, cy - diag - h),
        "N": (cx - w // 2, cy - d - h),
        "NW": (cx - diag - w, cy - diag - h),
        "W": (cx - d - w, cy - h // 2),
        "SW": (cx - diag - w, cy + diag),
        "S": (cx - w // 2, cy + d),
        "SE": (cx + diag, cy + diag),
    }[anchor]


def place_labels(g: TransitGraph, layout: Layout, style: StyleSpec = DEFAULT_STYLE) -> dict[str, dict]:
    """Pick, per station, the first anchor that collides with nothing.

    The eight compass anchors are tried nearest ring first; outer rings only
    come into play around busy interchanges.
    """
    pos = layout.positions
    segments = [(pos[u], pos[v]) for u, v in sorted(g.union_edges)]
    placed: dict[str, dict] = {}
    clear_edge = style.stroke_width / 2 + style.label_pad
    clear_node = style.node_radius + 6
    for s in g.stations:
        text = s.display_name.lower()
        size = label_size(text, style)
        center = pos[s.name]
        for ring, anchor in ((r, a) for r in range(LABEL_RINGS) for a in ANCHORS):
            x, y = candidate_origin(anchor, center, size, style, ring)
            box = (x, y, x + size[0], y + size[1])
            if x < 0 or y < 0 or box[2] > layout.width or box[3] > layout.height:
                continue
            inflated = (box[0] - clear_edge, box[1] - clear_edge, box[2] + clear_edge, box[3] + clear_edge)
            if any(_segment_hits_box(a, b, inflated) for a, b in segments):
                continue
            if _box_point_distance(box, center) < style.node_radius + 2:
                continue
            if any(_box_point_distance(box, pos[o]) < clear_node for o in pos if o != s.name):
                continue
            if any(_boxes_overlap(box, p["box"], style.label_separation) for p in placed.values()):
                continue
            mid = ((box[0] + box[2]) / 2, (box[1] + box[3]) / 2)
            own = math.dist(mid, center)
            if any(math.dist(mid, pos[o]) < own + style.label_assoc_margin for o in pos if o != s.name):
                continue
            placed[s.name] = {"name": s.name, "text": text, "box": list(box), "anchor": anchor, "ring": ring}
            break
        else:
            raise UnplaceableLabel(s.name)
    return placed


# -- legend ------------------------------------------------------------------


def legend_height(n_lines: int) -> int:
    return LEGEND_TOP_GAP + LEGEND_ROW_H * n_lines + 8


def draw_legend(lines: Sequence[Line], style: StyleSpec = DEFAULT_STYLE, width: int = 1024):
    """Legend block (one row per line, in id order) and its geometry relative to the block."""
    if not lines:
        raise ValueError("a legend needs at least one line")
    block = np.empty((legend_height(len(lines)), width, 3), np.uint8)
    block[:] = style.background
    rows = []
    sw, sh = LEGEND_SWATCH
    for i, line in enumerate(sorted(lines, key=lambda l: l.id)):
        top = LEGEND_TOP_GAP + i * LEGEND_ROW_H
        block[top : top + sh, LEGEND_X : LEGEND_X + sw] = line.color
        text_box = draw_text(block, line.name.lower(), (LEGEND_TEXT_X, top), style)
        rows.append({
            "line_id": line.id,
            "name": line.name,
            "color": list(line.color),
            "swatch": [LEGEND_X, top, LEGEND_X + sw, top + sh],
            "text_box": list(text_box),
        })
    return block, {"box": [0, 0, width, block.shape[0]], "rows": rows}


def _shift(box, dy):
    return [box[0], box[1] + dy, box[2], box[3] + dy]


def render(g: TransitGraph, layout: Layout, style: StyleSpec = DEFAULT_STYLE) -> tuple[np.ndarray, dict]:
    """Rasterize ``g`` at ``layout``; return the image and its ground-truth sidecar."""
    missing = g.station_names - set(layout.positions)
    if missing:
        raise RenderError(f"layout has no position for {sorted(missing)}")
    problems = style.problems()
    if problems:
        raise RenderError("invalid style: " + "; ".join(problems))
    labels = place_labels(g, layout, style)

    legend, legend_geo = draw_legend(g.lines, style, layout.width) if g.lines else (None, None)
    height = layout.height + (legend.shape[0] if legend is not None else 0)
    img = np.empty((height, layout.width, 3), np.uint8)
    img[:] = style.background
    pos = layout.positions
    for e in g.edges:
        draw_segment(img, pos[e.s1], pos[e.s2], style.stroke_width, g.line_by_id[e.line_id].color)
    for s in g.stations:
        draw_disk(img, pos[s.name], style.node_radius, style.node_color)
    for name in sorted(labels):
        draw_text(img, labels[name]["text"], labels[name]["box"][:2], style)

    if legend is not None:
        img[layout.height :] = legend
        off = layout.height
        legend_geo = {
            "box": _shift(legend_geo["box"], off),
            "rows": [dict(r, swatch=_shift(r["swatch"], off), text_box=_shift(r["text_box"], off))
                     for r in legend_geo["rows"]],
        }
    sidecar = {
        "width": layout.width,
        "height": height,
        "canvas": [layout.width, layout.height],
        "style": style.to_json(),
        "nodes": [{"name": s.name, "center": list(pos[s.name])} for s in g.stations],
        "labels": [labels[n] for n in sorted(labels)],
        "legend": legend_geo,
        "graph": graph_to_dict(g),
    }
    return img, sidecar


def save_png(img: np.ndarray, path: str | Path) -> None:
    Image.fromarray(img, "RGB").save(path, format="PNG")


def load_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB")).copy()
