"""Minimal deterministic SVG line charts (no plotting dependency).

Output is plain text with fixed number formatting, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#2ca02c", "#ff7f0e", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=150, top=40, bottom=55)


@dataclass
class Series:
    label: str
    x: list
    y: list
    dashed: bool = False
    color: str | None = None


@dataclass
class Chart:
    title: str
    xlabel: str
    ylabel: str
    series: list = field(default_factory=list)
    bands: list = field(default_factory=list)  # (label, x, lower, upper)
    hline: float | None = None

    def add(self, label, x, y, color=None):
        self.series.append(Series(label, list(x), list(y), color=color))

    def add_band(self, label, x, lower, upper):
        self.bands.append((label, list(x), list(lower), list(upper)))


def _num(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


def _finite(values):
    return [v for v in values if v is not None and math.isfinite(v)]


def _nice_ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def render(chart: Chart) -> str:
    xs = _finite([v for s in chart.series for v in s.x] + [v for b in chart.bands for v in b[1]])
    ys = _finite([v for s in chart.series for v in s.y]
                 + [v for b in chart.bands for v in b[2] + b[3]]
                 + ([chart.hline] if chart.hline is not None else []))
    xlo, xhi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    ylo, yhi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi == ylo:
        pad = abs(ylo) * 0.1 or 0.5
        ylo, yhi = ylo - pad, yhi + pad
    else:
        pad = 0.05 * (yhi - ylo)
        ylo, yhi = ylo - pad, yhi + pad

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (v - xlo) / (xhi - xlo) * pw

    def py(v):
        return MARGIN["top"] + (yhi - v) / (yhi - ylo) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(chart.title)}</text>',
    ]
    x0, y0 = MARGIN["left"], MARGIN["top"] + ph
    out.append(f'<rect x="{x0}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>')
    for t in _nice_ticks(xlo, xhi):
        out.append(f'<line x1="{_num(px(t))}" y1="{y0}" x2="{_num(px(t))}" y2="{y0 + 4}" stroke="#333"/>')
        out.append(f'<text x="{_num(px(t))}" y="{y0 + 16}" text-anchor="middle">{_tick_label(t)}</text>')
    for t in _nice_ticks(ylo, yhi):
        out.append(f'<line x1="{x0 - 4}" y1="{_num(py(t))}" x2="{x0}" y2="{_num(py(t))}" stroke="#333"/>')
        out.append(f'<text x="{x0 - 7}" y="{_num(py(t) + 4)}" text-anchor="end">{_tick_label(t)}</text>')
    out.append(f'<text class="xlabel" x="{x0 + pw / 2:.1f}" y="{HEIGHT - 12}" '
               f'text-anchor="middle">{escape(chart.xlabel)}</text>')
    out.append(f'<text class="ylabel" x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">{escape(chart.ylabel)}</text>')

    if chart.hline is not None:
        yv = _num(py(chart.hline))
        out.append(f'<line class="null" x1="{x0}" y1="{yv}" x2="{x0 + pw}" y2="{yv}" '
                   'stroke="#000" stroke-width="1"/>')

    legend = []
    for i, (label, bx, lower, upper) in enumerate(chart.bands):
        for edge in (lower, upper):
            for run in _runs(bx, edge):
                d = " ".join(("M" if j == 0 else "L") + f"{_num(px(a))},{_num(py(b))}"
                             for j, (a, b) in enumerate(run))
                out.append(f'<path class="band" d="{d}" fill="none" stroke="#555" '
                           'stroke-width="1" stroke-dasharray="5,3"/>')
        legend.append((label, "#555", True))

    for i, s in enumerate(chart.series):
        color = s.color or PALETTE[i % len(PALETTE)]
        pts = [(a, b) for a, b in zip(s.x, s.y) if b is not None and math.isfinite(b)]
        points = " ".join(f"{_num(px(a))},{_num(py(b))}" for a, b in pts)
        out.append(f'<polyline class="series" data-label="{escape(s.label, {chr(34): "&quot;"})}" '
                   f'points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if len(pts) <= 1 or any(not math.isfinite(b) for b in s.y if b is not None):
            for a, b in pts:
                out.append(f'<circle cx="{_num(px(a))}" cy="{_num(py(b))}" r="3" fill="{color}"/>')
        legend.append((s.label, color, False))

    lx = MARGIN["left"] + pw + 12
    for i, (label, color, dashed) in enumerate(legend):
        ly = MARGIN["top"] + 12 + 16 * i
        dash = ' stroke-dasharray="5,3"' if dashed else ""
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _runs(xs, ys):
    """Split a curve at non-finite values into contiguous runs."""
    run = []
    for a, b in zip(xs, ys):
        if b is None or not math.isfinite(b):
            if run:
                yield run
            run = []
        else:
            run.append((a, b))
    if run:
        yield run
