"""Minimal SVG line plots for tail-versus-bound figures."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = 60
COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * j / (n - 1) for j in range(n)]


def line_plot(series: Sequence[tuple[str, Sequence[float], Sequence[float]]], title: str = "",
              xlabel: str = "t", ylabel: str = "probability", log_y: bool = True,
              floor: float = 1e-6) -> str:
    """SVG text for ``(label, xs, ys)`` series; log scale clamps ``y`` at ``floor``."""
    def ty(y):
        return math.log10(max(y, floor)) if log_y else y

    xs = [x for _, sx, _ in series for x in sx]
    ys = [ty(y) for _, _, sy in series for y in sy]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return MARGIN + (x - x0) / (x1 - x0) * pw

    def py(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
           f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>']
    for x in _ticks(x0, x1):
        out.append(f'<text x="{px(x):.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{x:.3g}</text>')
    for y in _ticks(y0, y1):
        label = f"1e{y:.1f}" if log_y else f"{y:.3g}"
        out.append(f'<text x="{MARGIN - 6}" y="{py(y) + 4:.1f}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 16}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{HEIGHT / 2:.1f}" transform="rotate(-90 16 {HEIGHT / 2:.1f})" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    for k, (label, sx, sy) in enumerate(series):
        colour = COLOURS[k % len(COLOURS)]
        pts = " ".join(f"{px(x):.2f},{py(ty(y)):.2f}" for x, y in zip(sx, sy))
        if pts:
            out.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 4}" y="{MARGIN + 16 * k}" text-anchor="end" '
                   f'fill="{colour}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def tail_plot(report, title: str = "") -> str:
    """Empirical exceedance frequency, its upper confidence limit and the bound."""
    t = report.t_grid
    return line_plot([("bound", t, report.bound_values),
                      ("empirical", t, report.empirical),
                      ("99% upper limit", t, report.ci_upper)], title=title)
