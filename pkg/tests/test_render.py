import numpy as np
import pytest

from metrovqa.font import CHARSET, GLYPH_H, GLYPH_W, glyph_bitmap, text_bitmap
from metrovqa.generator import Layout, generate_graph, layout_graph
from metrovqa.harness.dataset import render_graph
from metrovqa.render import (
    LEGEND_SWATCH,
    UnplaceableLabel,
    build_glyph_atlas,
    draw_legend,
    load_png,
    render,
    save_png,
)
from metrovqa.style import (
    DEFAULT_STYLE,
    MIN_COLOR_DISTANCE,
    PALETTE,
    StyleSpec,
    canvas_size,
    color_distance,
)
from metrovqa.vision import classify_pixels, detect_nodes, read_legend

from _util import make_graph

PATH = make_graph({0: ["a", "b", "c"]})
PATH_LAYOUT = Layout({"a": (200, 300), "b": (400, 300), "c": (600, 300)}, 1024, 1024)


def test_charset_is_37_characters():
    assert len(CHARSET) == 37
    assert set(CHARSET) == set("abcdefghijklmnopqrstuvwxyz0123456789 ")


def test_glyphs_are_pairwise_distinct():
    shapes = {ch: glyph_bitmap(ch, 1).tobytes() for ch in CHARSET}
    assert len(set(shapes.values())) == len(CHARSET)


def test_visible_glyphs_touch_top_and_bottom_rows():
    # keeps vertical alignment of a cropped label unambiguous
    for ch in CHARSET.replace(" ", ""):
        g = glyph_bitmap(ch, 1)
        assert g.shape == (GLYPH_H, GLYPH_W)
        assert g[0].any() and g[-1].any(), ch


def test_text_bitmap_width():
    assert text_bitmap("ab", 2).shape == (GLYPH_H * 2, (2 * GLYPH_W + 1) * 2)


def test_atlas_is_complete_and_stable():
    a, b = build_glyph_atlas(), build_glyph_atlas()
    assert sorted(a) == sorted(CHARSET)
    assert all(np.array_equal(a[k], b[k]) for k in a)


def test_atlas_glyph_matches_rendered_label():
    g = make_graph({0: ["a", "bb"]})
    lay = Layout({"a": (200, 300), "bb": (400, 300)}, 1024, 1024)
    img, side = render(g, lay)
    box = next(l["box"] for l in side["labels"] if l["name"] == "a")
    ink = (img[box[1]:box[3], box[0]:box[2]] == DEFAULT_STYLE.label_color).all(axis=-1)
    assert np.array_equal(ink, build_glyph_atlas()["a"])


def test_palette_separation():
    assert DEFAULT_STYLE.problems() == []
    reserved = [DEFAULT_STYLE.background, DEFAULT_STYLE.node_color, DEFAULT_STYLE.label_color]
    colors = list(PALETTE) + reserved
    for i, a in enumerate(colors):
        for b in colors[i + 1:]:
            assert color_distance(a, b) >= MIN_COLOR_DISTANCE


def test_style_problems_detected():
    bad = StyleSpec(label_color=(250, 250, 250))
    assert bad.problems()


def test_path_render_contents():
    img, side = render(PATH, PATH_LAYOUT)
    assert img.shape[1] == 1024 and img.dtype == np.uint8
    assert len(detect_nodes(img)) == 3
    assert len(side["labels"]) == 3
    assert len(side["legend"]["rows"]) == 1
    stroke = (img[:1024] == PATH.lines[0].color).all(axis=-1)
    # the stroke runs between the disks along y = 300
    assert stroke[300, 300] and stroke[300, 500] and not stroke[300, 100]


def test_render_is_bit_identical():
    g = generate_graph("medium", 4)
    lay = layout_graph(g, 2, canvas_size("medium"))
    a, sa = render(g, lay)
    b, sb = render(g, lay)
    assert np.array_equal(a, b) and sa == sb


@pytest.mark.parametrize("size", ["small", "medium", "large"])
def test_pixels_use_only_style_colors(size):
    g = generate_graph(size, 17)
    _, img, _, _ = render_graph(g, 17, canvas_size(size))
    allowed = {DEFAULT_STYLE.background, DEFAULT_STYLE.node_color, DEFAULT_STYLE.label_color}
    allowed |= {l.color for l in g.lines}
    colors, counts = np.unique(img.reshape(-1, 3), axis=0, return_counts=True)
    seen = {tuple(int(v) for v in c) for c in colors}
    assert seen <= allowed
    assert (classify_pixels(img) >= 0).all()


def test_png_round_trip(tmp_path):
    img, _ = render(PATH, PATH_LAYOUT)
    save_png(img, tmp_path / "p.png")
    assert np.array_equal(load_png(tmp_path / "p.png"), img)


def test_legend_rows_follow_line_ids():
    g = make_graph({0: ["a", "b", "c"], 1: ["c", "d", "e"], 2: ["e", "f", "a"]})
    block, geo = draw_legend(g.lines)
    assert [r["line_id"] for r in geo["rows"]] == [0, 1, 2]
    tops = [r["swatch"][1] for r in geo["rows"]]
    assert tops == sorted(tops)
    for r, line in zip(geo["rows"], g.lines):
        x0, y0, x1, y1 = r["swatch"]
        assert (x1 - x0, y1 - y0) == LEGEND_SWATCH
        assert (block[y0:y1, x0:x1] == line.color).all()


def test_legend_text_is_readable():
    g = make_graph({0: ["a", "b"], 1: ["b", "c"], 2: ["c", "d"]})
    block, _ = draw_legend(g.lines)
    legend, _ = read_legend(block)
    assert sorted(legend.values()) == ["l0", "l1", "l2"]
    assert legend[PALETTE[1]] == "l1"


def test_crowded_layout_raises_unplaceable():
    names = [f"s{i}" for i in range(9)]
    g = make_graph({0: names[:3], 1: names[3:6], 2: names[6:]})
    # stations packed on a 3x3 grid 30 px apart leave no room for labels
    pos = {n: (500 + 30 * (i % 3), 500 + 30 * (i // 3)) for i, n in enumerate(names)}
    with pytest.raises(UnplaceableLabel):
        render(g, Layout(pos, 1024, 1024))
