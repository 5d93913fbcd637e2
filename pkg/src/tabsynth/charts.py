"""Self-contained SVG bar charts with an optional secondary log axis.

No plotting dependency: the output is deterministic text, which keeps chart
structure diffable and testable (count the ``bar`` rects, find the dashed
reference line).
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 720, 420
MARGIN = {"left": 64, "right": 72, "top": 48, "bottom": 56}
PALETTE = ["#2a9d8f", "#e76f51", "#577590", "#e9c46a"]
LINE_COLOR = "#222222"
REF_COLOR = "#d62828"


def _nice_ceiling(value: float) -> float:
    if value <= 0:
        return 1.0
    exp = math.floor(math.log10(value))
    base = 10.0**exp
    for m in (1, 2, 5, 10):
        if value <= m * base:
            return m * base
    return 10 * base


def render_grouped_bars(
    group_labels,
    series: dict,
    title: str = "",
    y_label: str = "",
    secondary=None,
    secondary_label: str = "",
    ref_line: float | None = None,
) -> str:
    """Grouped bar chart: one group per label, one bar per series entry.

    ``secondary`` draws a polyline on a logarithmic right-hand axis;
    ``ref_line`` draws a dashed horizontal reference on the primary axis.
    """
    if not group_labels:
        raise ValueError("no groups to plot")
    for name, values in series.items():
        if len(values) != len(group_labels):
            raise ValueError(f"series {name!r} length does not match groups")

    plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
    plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    x0, y0 = MARGIN["left"], MARGIN["top"]

    peak = max(max(v for v in vals) for vals in series.values())
    if ref_line is not None:
        peak = max(peak, ref_line)
    y_max = _nice_ceiling(peak * 1.1)

    def y_px(v):
        return y0 + plot_h * (1.0 - v / y_max)

    n_groups, n_series = len(group_labels), len(series)
    group_w = plot_w / n_groups
    bar_w = group_w * 0.7 / n_series

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="15">'
        f"{escape(title)}</text>",
    ]

    # primary axis with 5 ticks
    parts.append(
        f'<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{y0 + plot_h}" stroke="black"/>'
    )
    parts.append(
        f'<line class="axis" x1="{x0}" y1="{y0 + plot_h}" x2="{x0 + plot_w}" '
        f'y2="{y0 + plot_h}" stroke="black"/>'
    )
    for i in range(6):
        v = y_max * i / 5
        py = y_px(v)
        parts.append(
            f'<text x="{x0 - 6}" y="{py + 4}" text-anchor="end">{v:g}</text>'
        )
        if i:
            parts.append(
                f'<line x1="{x0}" y1="{py}" x2="{x0 + plot_w}" y2="{py}" '
                f'stroke="#dddddd"/>'
            )
    if y_label:
        parts.append(
            f'<text x="16" y="{y0 + plot_h / 2}" text-anchor="middle" '
            f'transform="rotate(-90 16 {y0 + plot_h / 2})">{escape(y_label)}</text>'
        )

    for g, label in enumerate(group_labels):
        cx = x0 + group_w * (g + 0.5)
        parts.append(
            f'<text x="{cx}" y="{y0 + plot_h + 18}" text-anchor="middle">'
            f"{escape(str(label))}</text>"
        )
        for s, (name, values) in enumerate(series.items()):
            bx = cx - (n_series * bar_w) / 2 + s * bar_w
            top = y_px(values[g])
            parts.append(
                f'<rect class="bar" x="{bx:.2f}" y="{top:.2f}" width="{bar_w:.2f}" '
                f'height="{y0 + plot_h - top:.2f}" fill="{PALETTE[s % len(PALETTE)]}"/>'
            )

    for s, name in enumerate(series):
        lx = x0 + 12 + s * 150
        parts.append(
            f'<rect x="{lx}" y="{HEIGHT - 20}" width="12" height="12" '
            f'fill="{PALETTE[s % len(PALETTE)]}"/>'
        )
        parts.append(f'<text x="{lx + 16}" y="{HEIGHT - 10}">{escape(name)}</text>')

    if ref_line is not None:
        py = y_px(ref_line)
        parts.append(
            f'<line class="ref-line" x1="{x0}" y1="{py:.2f}" x2="{x0 + plot_w}" '
            f'y2="{py:.2f}" stroke="{REF_COLOR}" stroke-dasharray="6 4" stroke-width="1.5"/>'
        )

    if secondary is not None:
        if len(secondary) != len(group_labels):
            raise ValueError("secondary series length does not match groups")
        if min(secondary) <= 0:
            raise ValueError("secondary log axis needs positive values")
        lo = math.floor(math.log10(min(secondary)))
        hi = math.ceil(math.log10(max(secondary)))
        if hi == lo:
            hi = lo + 1

        def sec_px(v):
            return y0 + plot_h * (1.0 - (math.log10(v) - lo) / (hi - lo))

        points = " ".join(
            f"{x0 + group_w * (g + 0.5):.2f},{sec_px(v):.2f}"
            for g, v in enumerate(secondary)
        )
        parts.append(
            f'<polyline class="size-line" points="{points}" fill="none" '
            f'stroke="{LINE_COLOR}" stroke-width="2"/>'
        )
        for g, v in enumerate(secondary):
            parts.append(
                f'<circle cx="{x0 + group_w * (g + 0.5):.2f}" cy="{sec_px(v):.2f}" '
                f'r="3" fill="{LINE_COLOR}"/>'
            )
        sx = x0 + plot_w
        parts.append(
            f'<line class="axis" x1="{sx}" y1="{y0}" x2="{sx}" y2="{y0 + plot_h}" '
            f'stroke="black"/>'
        )
        for e in range(lo, hi + 1):
            py = sec_px(10.0**e)
            parts.append(
                f'<text x="{sx + 6}" y="{py + 4}" text-anchor="start">1e{e}</text>'
            )
        if secondary_label:
            parts.append(
                f'<text x="{WIDTH - 12}" y="{y0 + plot_h / 2}" text-anchor="middle" '
                f'transform="rotate(90 {WIDTH - 12} {y0 + plot_h / 2})">'
                f"{escape(secondary_label)}</text>"
            )

    parts.append("</svg>")
    return "\n".join(parts)
