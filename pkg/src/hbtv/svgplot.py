"""Standalone SVG line plots with a linear or log10 y axis.

Output depends only on the data, so reruns produce identical bytes.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 720, 440
LEFT, RIGHT, TOP, BOTTOM = 78, 24, 40, 52
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


class ClippedValuesWarning(UserWarning):
    pass


def _nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _fmt_tick(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e5 or abs(v) < 1e-3:
        return f"{v:.0e}"
    return f"{v:g}"


def _expand(lo: float, hi: float) -> tuple[float, float]:
    if hi > lo:
        return lo, hi
    pad = abs(lo) * 0.1 or 1.0
    return lo - pad, hi + pad


def line_plot(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    *,
    log: bool = False,
    title: str = "",
    xlabel: str = "k",
    ylabel: str = "",
    floor: float = 1e-16,
) -> str:
    """Render (label, x, y) series as an SVG document.

    On a log axis, values at or below ``floor`` are clipped to it and a
    ClippedValuesWarning is issued.  Non-finite points are dropped.  A series
    with a single point is drawn as a marker.
    """
    if not series:
        raise ValueError("nothing to plot")
    prepared = []
    clipped = 0
    for label, xs, ys in series:
        x = np.asarray(xs, dtype=float)
        y = np.asarray(ys, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        x, y = x[keep], y[keep]
        if log:
            low = y <= floor
            clipped += int(np.count_nonzero(low))
            y = np.log10(np.where(low, floor, y))
        prepared.append((label, x, y))
    if clipped:
        warnings.warn(f"{clipped} value(s) <= {floor:g} clipped to the log-axis floor", ClippedValuesWarning, stacklevel=2)
    if not any(len(x) for _, x, _ in prepared):
        raise ValueError("no finite points to plot")

    xs_all = np.concatenate([x for _, x, _ in prepared])
    ys_all = np.concatenate([y for _, _, y in prepared])
    x0, x1 = _expand(float(xs_all.min()), float(xs_all.max()))
    y0, y1 = _expand(float(ys_all.min()), float(ys_all.max()))
    if log:
        y0, y1 = math.floor(y0), math.ceil(y1)
        if y1 == y0:
            y1 += 1
    pw = WIDTH - LEFT - RIGHT
    ph = HEIGHT - TOP - BOTTOM

    def sx(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return TOP + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>')

    # grid and ticks
    for t in _nice_ticks(x0, x1):
        px = sx(t)
        out.append(f'<line x1="{px:.2f}" y1="{TOP}" x2="{px:.2f}" y2="{TOP + ph}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{px:.2f}" y="{TOP + ph + 18}" text-anchor="middle">{_fmt_tick(t)}</text>')
    if log:
        step = max(1, math.ceil((y1 - y0) / 10))
        yticks = [float(e) for e in range(int(y0), int(y1) + 1, step)]
        ylabels = [f"1e{int(e)}" for e in yticks]
    else:
        yticks = _nice_ticks(y0, y1)
        ylabels = [_fmt_tick(t) for t in yticks]
    for t, lab in zip(yticks, ylabels):
        py = sy(t)
        out.append(f'<line x1="{LEFT}" y1="{py:.2f}" x2="{LEFT + pw}" y2="{py:.2f}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{LEFT - 6}" y="{py + 4:.2f}" text-anchor="end">{lab}</text>')
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        cy = TOP + ph / 2
        out.append(
            f'<text x="16" y="{cy:.1f}" text-anchor="middle" transform="rotate(-90 16 {cy:.1f})">{escape(ylabel)}</text>'
        )

    # data
    for i, (label, x, y) in enumerate(prepared):
        color = PALETTE[i % len(PALETTE)]
        if len(x) == 1:
            out.append(f'<circle cx="{sx(x[0]):.2f}" cy="{sy(y[0]):.2f}" r="3.5" fill="{color}"/>')
        elif len(x):
            pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')

    # legend
    lx = LEFT + pw - 8
    for i, (label, _, _) in enumerate(prepared):
        color = PALETTE[i % len(PALETTE)]
        ly = TOP + 16 + 16 * i
        out.append(f'<line x1="{lx - 150}" y1="{ly - 4}" x2="{lx - 130}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx - 124}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
