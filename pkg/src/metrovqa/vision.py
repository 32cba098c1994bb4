"""Optical graph recognition and OCR for images produced by the renderer.

The renderer never blends colors, so each stage starts by classifying pixels
against a reserved color within ``TAU_COLOR`` (channel-sum distance). Noise
below half that tolerance cannot flip a pixel's class.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from metrovqa.font import GLYPH_H, GLYPH_W, SPACING
from metrovqa.graph import Edge, Line, Station, TransitGraph, validate_graph
from metrovqa.style import (
    DEFAULT_STYLE,
    EDGE_SAMPLES,
    EDGE_THRESHOLD,
    TAU_COLOR,
    StyleSpec,
)

log = logging.getLogger(__name__)

SWATCH_SIZE = (32, 14)
# widest possible gap inside one label is 4 font units at scale 2
_LABEL_BRIDGE = np.ones((3, 11), dtype=bool)
_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class DetectedNode:
    center: tuple[float, float]  # (x, y)
    radius: float


@dataclass(frozen=True)
class DetectedLabel:
    text: str
    box: tuple[int, int, int, int]  # x0, y0, x1, y1 (exclusive)
    confidence: float

    @property
    def center(self) -> tuple[float, float]:
        return ((self.box[0] + self.box[2]) / 2, (self.box[1] + self.box[3]) / 2)


@dataclass(frozen=True)
class DetectedEdge:
    i: int
    j: int
    color: tuple[int, int, int]
    fraction: float


@dataclass
class RecoveredGraph:
    nodes: list[DetectedNode]
    names: list[str]
    adjacency: list[DetectedEdge]
    legend: dict[tuple[int, int, int], str]
    labels: list[DetectedLabel] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_transit_graph(self) -> TransitGraph:
        legend_order = list(self.legend)
        colors = sorted({e.color for e in self.adjacency},
                        key=lambda c: (legend_order.index(c) if c in self.legend else len(legend_order), c))
        ids = {}
        lines = []
        for c in colors:
            lid = legend_order.index(c) if c in self.legend else len(legend_order) + len(ids)
            ids[c] = lid
            name = self.legend.get(c) or "line_#%02x%02x%02x" % c
            lines.append(Line(lid, name, c))
        stations = [Station(n, n) for n in self.names]
        edges = [Edge(self.names[e.i], self.names[e.j], ids[e.color]) for e in self.adjacency]
        g = TransitGraph(tuple(stations), tuple(lines), tuple(edges))
        return g.with_violations(validate_graph(g))


def color_mask(img: np.ndarray, color, tau: int = TAU_COLOR) -> np.ndarray:
    diff = np.abs(img.astype(np.int16) - np.asarray(color, np.int16)).sum(axis=-1)
    return diff <= tau


BG, NODE, LABEL = 0, 1, 2  # palette color k is class 3 + k; -1 matches nothing


def classify_pixels(img: np.ndarray, style: StyleSpec = DEFAULT_STYLE, tau: int = TAU_COLOR) -> np.ndarray:
    """Per-pixel class map over background, node, label and palette colors."""
    colors = np.array([style.background, style.node_color, style.label_color, *style.palette], np.int16)
    out = np.full(img.shape[:2], -1, np.int8)
    bg = color_mask(img, style.background, tau)
    out[bg] = BG
    fg = np.nonzero(~bg)
    out[fg] = _classify_colors(img[fg], colors, tau)
    return out


def detect_nodes(img: np.ndarray, style: StyleSpec = DEFAULT_STYLE,
                 warnings: list[str] | None = None, classes: np.ndarray | None = None) -> list[DetectedNode]:
    if classes is None:
        classes = classify_pixels(img, style)
    mask = classes == NODE
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        return []
    idx = np.arange(1, n + 1)
    areas = ndimage.sum_labels(mask, labels, idx)
    centers = ndimage.center_of_mass(mask, labels, idx)
    expected = math.pi * style.node_radius**2
    out = []
    for area, (cy, cx) in zip(areas, centers):
        if 0.5 * expected <= area <= 1.5 * expected:
            out.append(DetectedNode((float(cx), float(cy)), math.sqrt(area / math.pi)))
        elif warnings is not None:
            warnings.append(f"dropped node-colored blob of area {int(area)} at ({cx:.0f},{cy:.0f})")
    out.sort(key=lambda d: (round(d.center[1], 3), round(d.center[0], 3)))
    return out


def _classify_colors(pixels: np.ndarray, palette: np.ndarray, tau: int) -> np.ndarray:
    """Index into ``palette`` of each pixel's color, or -1 when none is within tau."""
    d = np.abs(pixels[..., None, :].astype(np.int16) - palette.astype(np.int16)).sum(axis=-1)
    best = d.argmin(axis=-1)
    return np.where(d.min(axis=-1) <= tau, best, -1)


def detect_edges(img: np.ndarray, nodes: Sequence[DetectedNode], palette: Sequence = DEFAULT_STYLE.palette,
                 style: StyleSpec = DEFAULT_STYLE, samples: int = EDGE_SAMPLES,
                 threshold: float = EDGE_THRESHOLD, warnings: list[str] | None = None) -> list[DetectedEdge]:
    """Test every node pair by sampling the open segment between the two disks.

    A straight edge never passes within two radii of a station it does not
    serve, so a chord that grazes a third disk is rejected outright; this
    stops collinear runs of one line from reading as long edges.
    """
    n = len(nodes)
    if n < 2:
        return []
    pal = np.asarray(palette, np.int16)
    P = np.array([d.center for d in nodes], float)
    R = np.array([d.radius for d in nodes], float)
    h, w = img.shape[:2]
    graze = style.node_radius * 1.5
    ii, jj = np.triu_indices(n, 1)
    out = []
    t = (np.arange(samples) + 0.5) / samples
    for i, j in zip(ii.tolist(), jj.tolist()):
        a, b = P[i], P[j]
        ab = b - a
        L = float(np.hypot(*ab))
        u = ab / L
        start = R[i] + 2
        stop = L - R[j] - 2
        if stop <= start:
            continue
        # reject chords that pass close to another station
        rel = P - a
        proj = np.clip(rel @ u, 0, L)
        dist = np.hypot(*(rel - proj[:, None] * u).T)
        dist[[i, j]] = np.inf
        if (dist < graze).any():
            continue
        pts = a + np.outer(start + t * (stop - start), u)
        xs = np.clip(np.rint(pts[:, 0]).astype(int), 0, w - 1)
        ys = np.clip(np.rint(pts[:, 1]).astype(int), 0, h - 1)
        cls = _classify_colors(img[ys, xs], pal, TAU_COLOR)
        counts = np.bincount(cls[cls >= 0], minlength=len(pal))
        frac = counts / samples
        winners = np.flatnonzero(frac >= threshold)
        if len(winners) == 0:
            continue
        if len(winners) > 1 and warnings is not None:
            warnings.append(f"ambiguous colors for pair {i}-{j}")
        k = int(winners[np.argmax(frac[winners])])
        out.append(DetectedEdge(i, j, tuple(int(c) for c in pal[k]), float(frac[k])))
    return out


# -- OCR -------------------------------------------------------------------


def _atlas_arrays(atlas: dict[str, np.ndarray]) -> tuple[list[str], np.ndarray]:
    chars = sorted(atlas)
    return chars, np.stack([atlas[c] for c in chars]).astype(np.int16)


def _read_cluster(ink: np.ndarray, x0: int, y0: int, chars: list[str], bank: np.ndarray,
                  scale: int, cutoff: float) -> tuple[str, float] | None:
    gh, gw = bank.shape[1:]
    adv = (GLYPH_W + SPACING) * scale
    H, W = ink.shape
    best = None
    for shift in range(0, 2 * scale + 1):
        ox = -shift
        n = max(1, math.ceil((W - ox + SPACING * scale) / adv))
        canvas = np.zeros((gh, n * adv), np.int16)
        src = ink[:gh, : max(0, min(W, n * adv + ox))]
        canvas[: src.shape[0], shift : shift + src.shape[1]] = src
        cells = canvas.reshape(gh, n, adv)[:, :, :gw].transpose(1, 0, 2)
        gaps = int(canvas.reshape(gh, n, adv)[:, :, gw:].sum()) + int(ink[gh:].sum())
        dist = np.abs(cells[:, None] - bank[None]).sum(axis=(2, 3))
        pick = dist.argmin(axis=1)
        dmin = dist[np.arange(n), pick]
        cost = int(dmin.sum()) + gaps
        if best is None or cost < best[0]:
            best = (cost, pick, dmin)
    cost, pick, dmin = best
    area = gh * gw
    text = []
    confs = []
    for k, d in zip(pick, dmin):
        if d > cutoff * area:
            confs.append(0.0)
            continue
        text.append(chars[k])
        confs.append(1 - d / area)
    s = "".join(text).strip()
    if not s:
        return None
    return s, float(np.mean(confs))


def ocr_labels(img: np.ndarray, atlas: dict[str, np.ndarray], style: StyleSpec = DEFAULT_STYLE,
               cutoff: float = 0.25, classes: np.ndarray | None = None) -> list[DetectedLabel]:
    """Segment label-colored clusters and read them against the glyph atlas."""
    if classes is None:
        classes = classify_pixels(img, style)
    mask = classes == LABEL
    if not mask.any():
        return []
    grouped, _ = ndimage.label(ndimage.binary_dilation(mask, structure=_LABEL_BRIDGE))
    chars, bank = _atlas_arrays(atlas)
    out = []
    for k, sl in enumerate(ndimage.find_objects(grouped), start=1):
        if sl is None:
            continue
        ink = mask[sl] & (grouped[sl] == k)
        ys, xs = np.nonzero(ink)
        if len(ys) == 0:
            continue
        y0, y1 = sl[0].start + ys.min(), sl[0].start + ys.max() + 1
        x0, x1 = sl[1].start + xs.min(), sl[1].start + xs.max() + 1
        crop = ink[ys.min():ys.max() + 1, xs.min():xs.max() + 1].astype(np.int16)
        read = _read_cluster(crop, x0, y0, chars, bank, style.label_scale, cutoff)
        if read is None:
            continue
        text, conf = read
        out.append(DetectedLabel(text, (int(x0), int(y0), int(x1), int(y1)), conf))
    out.sort(key=lambda l: (l.box[1], l.box[0]))
    return out


def associate_labels(nodes: Sequence[DetectedNode], labels: Sequence[DetectedLabel]) -> list[str]:
    """Name each node after its closest label, greedily by ascending distance.

    A label that loses its nearest node to a closer label moves on to its
    next-nearest free node. Nodes left without a label become ``unk_k``.
    """
    pairs = sorted(
        (math.dist(l.center, n.center), li, ni)
        for li, l in enumerate(labels)
        for ni, n in enumerate(nodes)
    )
    names: list[str | None] = [None] * len(nodes)
    used_labels: set[int] = set()
    for _, li, ni in pairs:
        if li in used_labels or names[ni] is not None:
            continue
        names[ni] = labels[li].text.replace(" ", "")
        used_labels.add(li)
    seen: dict[str, int] = {}
    out = []
    unk = 0
    for name in names:
        if name is None:
            name = f"unk_{unk}"
            unk += 1
        if name in seen:
            seen[name] += 1
            name = f"{name}_{seen[name]}"
        else:
            seen[name] = 1
        out.append(name)
    return out


def find_swatches(img: np.ndarray, style: StyleSpec = DEFAULT_STYLE, tol: int = 1,
                  classes: np.ndarray | None = None) -> list[tuple[tuple[int, int, int], tuple[int, int, int, int]]]:
    """Solid palette-colored rectangles of the legend swatch size, top to bottom."""
    if classes is None:
        classes = classify_pixels(img, style)
    found = []
    sw, sh = SWATCH_SIZE
    for k, color in enumerate(style.palette):
        mask = classes == 3 + k
        if not mask.any():
            continue
        lab, _ = ndimage.label(mask)
        for k, sl in enumerate(ndimage.find_objects(lab), start=1):
            hgt = sl[0].stop - sl[0].start
            wid = sl[1].stop - sl[1].start
            if abs(wid - sw) > tol or abs(hgt - sh) > tol:
                continue
            if (lab[sl] == k).mean() < 0.95:
                continue
            found.append((tuple(int(c) for c in color), (sl[1].start, sl[0].start, sl[1].stop, sl[0].stop)))
    found.sort(key=lambda f: (f[1][1], f[1][0]))
    return found


def read_legend(img: np.ndarray, atlas: dict[str, np.ndarray] | None = None,
                style: StyleSpec = DEFAULT_STYLE, labels: Sequence[DetectedLabel] | None = None,
                classes: np.ndarray | None = None) -> tuple[dict[tuple[int, int, int], str], set[int]]:
    """Map swatch colors to the text beside them.

    Returns the mapping and the indices (into ``labels``) of label clusters
    consumed by the legend, so callers can exclude them from station labels.
    """
    if labels is None:
        from metrovqa.render import build_glyph_atlas

        labels = ocr_labels(img, atlas or build_glyph_atlas(style), style, classes=classes)
    legend: dict[tuple[int, int, int], str] = {}
    used: set[int] = set()
    for color, (x0, y0, x1, y1) in find_swatches(img, style, classes=classes):
        cy = (y0 + y1) / 2
        best = None
        for li, l in enumerate(labels):
            if li in used:
                continue
            if abs(l.center[1] - cy) <= 4 and 0 <= l.box[0] - x1 <= 24:
                if best is None or l.box[0] < labels[best].box[0]:
                    best = li
        if best is not None:
            legend[color] = labels[best].text.replace(" ", "")
            used.add(best)
    return legend, used


def recover(img: np.ndarray, atlas: dict[str, np.ndarray] | None = None,
            palette: Sequence | None = None, style: StyleSpec = DEFAULT_STYLE) -> RecoveredGraph:
    from metrovqa.render import build_glyph_atlas

    atlas = atlas or build_glyph_atlas(style)
    palette = palette or style.palette
    warnings: list[str] = []
    classes = classify_pixels(img, style)
    nodes = detect_nodes(img, style, warnings, classes)
    labels = ocr_labels(img, atlas, style, classes=classes)
    legend, used = read_legend(img, atlas, style, labels, classes)
    station_labels = [l for k, l in enumerate(labels) if k not in used]
    names = associate_labels(nodes, station_labels)
    edges = detect_edges(img, nodes, palette, style, warnings=warnings)
    return RecoveredGraph(nodes, names, edges, legend, station_labels, warnings)


def parse_image(img: np.ndarray, atlas: dict[str, np.ndarray] | None = None,
                palette: Sequence | None = None, style: StyleSpec = DEFAULT_STYLE) -> TransitGraph:
    return recover(img, atlas, palette, style).to_transit_graph()


# -- diagnostics -----------------------------------------------------------


def diagnose(rec: RecoveredGraph, sidecar: dict, tol: float = 2.0) -> list[str]:
    """Attribute disagreements with the ground truth to a cause.

    Causes: node-miss, ocr-miss, assoc-miss, edge-miss, legend-miss.
    An empty list means the recovered graph equals the source.
    """
    causes = []
    truth_nodes = {n["name"]: tuple(n["center"]) for n in sidecar["nodes"]}
    truth_labels = {l["name"]: l["text"] for l in sidecar["labels"]}
    match: dict[int, str] = {}
    for k, node in enumerate(rec.nodes):
        near = min(truth_nodes, key=lambda s: math.dist(truth_nodes[s], node.center), default=None)
        if near is not None and math.dist(truth_nodes[near], node.center) <= tol:
            match[k] = near
    if len(rec.nodes) != len(truth_nodes) or len(set(match.values())) != len(truth_nodes):
        causes.append(f"node-miss: detected {len(rec.nodes)} of {len(truth_nodes)} stations")
    read = sorted(l.text for l in rec.labels)
    if read != sorted(truth_labels.values()):
        missing = sorted(set(truth_labels.values()) - set(read))
        causes.append(f"ocr-miss: labels {missing[:3]} not read exactly")
    for k, name in match.items():
        if rec.names[k] != name and truth_labels.get(name) in read:
            causes.append(f"assoc-miss: station {name} named {rec.names[k]}")
    truth_edges = {(min(e["s1"], e["s2"]), max(e["s1"], e["s2"])) for e in sidecar["graph"]["edges"]}
    got_edges = set()
    for e in rec.adjacency:
        if e.i in match and e.j in match:
            a, b = sorted((match[e.i], match[e.j]))
            got_edges.add((a, b))
        else:
            got_edges.add(("?", "?"))
    if got_edges != truth_edges:
        causes.append(f"edge-miss: {len(truth_edges - got_edges)} missed, {len(got_edges - truth_edges)} spurious")
    truth_legend = {tuple(r["color"]): r["name"] for r in (sidecar.get("legend") or {"rows": []})["rows"]}
    if rec.legend != truth_legend:
        causes.append("legend-miss: legend names or colors differ")
    if not causes:
        # structure and names agree; line coloring must still match
        truth_color = {}
        for e in sidecar["graph"]["edges"]:
            truth_color[tuple(sorted((e["s1"], e["s2"])))] = e["line_id"]
        colors = {l["id"]: tuple(l["color"]) for l in sidecar["graph"]["lines"]}
        for e in rec.adjacency:
            key = tuple(sorted((match[e.i], match[e.j])))
            if colors[truth_color[key]] != e.color:
                causes.append(f"edge-miss: edge {key} read with the wrong line color")
    return causes


def dump_masks(img: np.ndarray, out_dir: str | Path, style: StyleSpec = DEFAULT_STYLE) -> list[Path]:
    """Write the node, label and per-line segmentation masks as PNGs."""
    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    masks = {"nodes": color_mask(img, style.node_color), "labels": color_mask(img, style.label_color)}
    for c in style.palette:
        m = color_mask(img, c)
        if m.any():
            masks["line_%02x%02x%02x" % c] = m
    for name, m in masks.items():
        p = out_dir / f"mask_{name}.png"
        Image.fromarray((m * 255).astype(np.uint8), "L").save(p)
        written.append(p)
    return written
