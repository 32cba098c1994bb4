"""Colors and geometry shared by the layout, the renderer and the vision module."""

from __future__ import annotations

from dataclasses import dataclass, field

Color = tuple[int, int, int]

BACKGROUND: Color = (255, 255, 255)
NODE_COLOR: Color = (0, 0, 0)
LABEL_COLOR: Color = (120, 120, 120)

# every pair (and every color vs. the three reserved ones) is >= 180 apart
# in channel-sum distance
PALETTE: tuple[Color, ...] = (
    (255, 60, 0),
    (0, 210, 60),
    (75, 105, 240),
    (180, 180, 0),
    (210, 60, 240),
    (45, 255, 180),
    (120, 30, 30),
    (225, 0, 105),
    (30, 60, 150),
    (255, 105, 150),
    (135, 255, 75),
    (120, 0, 195),
)
MIN_COLOR_DISTANCE = 180

NODE_RADIUS = 10
D_MIN = 3 * NODE_RADIUS
E_MIN = 2 * NODE_RADIUS

# vision thresholds
TAU_COLOR = 60
EDGE_SAMPLES = 64
EDGE_THRESHOLD = 0.8


def color_distance(a, b) -> int:
    return sum(abs(int(x) - int(y)) for x, y in zip(a, b))


def canvas_size(size_tag: str) -> int:
    return 1536 if size_tag == "large" else 1024


@dataclass(frozen=True)
class StyleSpec:
    node_radius: int = NODE_RADIUS
    stroke_width: int = 5
    label_offset: int = 8
    label_scale: int = 2
    label_pad: int = 2
    label_separation: int = 12
    # a label's centre must be this much closer to its own node than to any other
    label_assoc_margin: int = 8
    background: Color = BACKGROUND
    node_color: Color = NODE_COLOR
    label_color: Color = LABEL_COLOR
    legend_position: str = "bottom"
    palette: tuple[Color, ...] = field(default=PALETTE)

    def problems(self) -> list[str]:
        out = []
        reserved = [self.background, self.node_color, self.label_color]
        for i, a in enumerate(reserved):
            for b in reserved[i + 1:]:
                if color_distance(a, b) < MIN_COLOR_DISTANCE:
                    out.append(f"reserved colors {a} and {b} too close")
        for i, c in enumerate(self.palette):
            for other in reserved + list(self.palette[i + 1:]):
                if color_distance(c, other) < MIN_COLOR_DISTANCE:
                    out.append(f"palette color {c} too close to {other}")
        if self.legend_position != "bottom":
            out.append("only a bottom legend is supported")
        return out

    def to_json(self) -> dict:
        return {
            "node_radius": self.node_radius,
            "stroke_width": self.stroke_width,
            "label_offset": self.label_offset,
            "label_scale": self.label_scale,
            "background": list(self.background),
            "node_color": list(self.node_color),
            "label_color": list(self.label_color),
            "legend_position": self.legend_position,
        }


DEFAULT_STYLE = StyleSpec()
