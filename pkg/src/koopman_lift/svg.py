"""Minimal deterministic SVG line plots.

No plotting dependency: output is a hand-assembled SVG string whose
coordinates are fixed-precision, so the same data always produces the same
bytes.
"""

from __future__ import annotations

import math

PALETTE = ("#1b6ca8", "#c0392b", "#27ae60", "#8e44ad", "#e67e22",
           "#16a085", "#7f8c8d", "#2c3e50")

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64.0, 16.0, 32.0, 48.0


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


def _finite(values) -> list[float]:
    return [float(v) for v in values if math.isfinite(v)]


def line_plot_svg(series, *, title: str = "", xlabel: str = "", ylabel: str = "",
                  log_y: bool = False, width: int = 720, height: int = 480) -> str:
    """Render labeled (xs, ys) series as an SVG document string.

    ``series`` is a sequence of ``(label, xs, ys)`` triples.  With ``log_y``
    the y axis is base-10 logarithmic and non-positive values are dropped.
    Non-finite points break the polyline rather than distorting the scale.
    """
    plot_w = width - _MARGIN_L - _MARGIN_R
    plot_h = height - _MARGIN_T - _MARGIN_B

    def usable(x, y):
        if not (math.isfinite(x) and math.isfinite(y)):
            return False
        return y > 0.0 if log_y else True

    xs_all, ys_all = [], []
    for _, xs, ys in series:
        for x, y in zip(xs, ys):
            if usable(x, y):
                xs_all.append(float(x))
                ys_all.append(math.log10(float(y)) if log_y else float(y))
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    x_pad = 0.02 * (x_hi - x_lo)
    y_pad = 0.05 * (y_hi - y_lo)
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    def px(x):
        return _MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return _MARGIN_T + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{_fmt(_MARGIN_L)}" y="{_fmt(_MARGIN_T)}" width="{_fmt(plot_w)}" '
        f'height="{_fmt(plot_h)}" fill="none" stroke="#333333"/>',
    ]
    if title:
        parts.append(f'<text x="{_fmt(width / 2)}" y="20" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="14">{title}</text>')

    n_ticks = 5
    for i in range(n_ticks):
        f = i / (n_ticks - 1)
        xv = x_lo + f * (x_hi - x_lo)
        yv = y_lo + f * (y_hi - y_lo)
        xp, yp = px(xv), py(yv)
        parts.append(f'<line x1="{_fmt(xp)}" y1="{_fmt(_MARGIN_T + plot_h)}" '
                     f'x2="{_fmt(xp)}" y2="{_fmt(_MARGIN_T + plot_h + 5)}" stroke="#333333"/>')
        parts.append(f'<text x="{_fmt(xp)}" y="{_fmt(_MARGIN_T + plot_h + 18)}" '
                     f'text-anchor="middle" font-family="sans-serif" font-size="10">'
                     f'{_tick_label(xv)}</text>')
        parts.append(f'<line x1="{_fmt(_MARGIN_L - 5)}" y1="{_fmt(yp)}" '
                     f'x2="{_fmt(_MARGIN_L)}" y2="{_fmt(yp)}" stroke="#333333"/>')
        label = (f"1e{yv:.2f}" if log_y else _tick_label(yv))
        parts.append(f'<text x="{_fmt(_MARGIN_L - 8)}" y="{_fmt(yp + 3)}" '
                     f'text-anchor="end" font-family="sans-serif" font-size="10">{label}</text>')
    if xlabel:
        parts.append(f'<text x="{_fmt(_MARGIN_L + plot_w / 2)}" y="{_fmt(height - 10.0)}" '
                     f'text-anchor="middle" font-family="sans-serif" font-size="12">{xlabel}</text>')
    if ylabel:
        yc = _MARGIN_T + plot_h / 2
        parts.append(f'<text x="16" y="{_fmt(yc)}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="12" '
                     f'transform="rotate(-90 16 {_fmt(yc)})">{ylabel}</text>')

    for s, (label, xs, ys) in enumerate(series):
        color = PALETTE[s % len(PALETTE)]
        run: list[str] = []
        segments: list[list[str]] = []
        for x, y in zip(xs, ys):
            if usable(x, y):
                yy = math.log10(float(y)) if log_y else float(y)
                run.append(f"{_fmt(px(float(x)))},{_fmt(py(yy))}")
            elif run:
                segments.append(run)
                run = []
        if run:
            segments.append(run)
        for seg in segments:
            if len(seg) == 1:
                cx, cy = seg[0].split(",")
                parts.append(f'<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>')
            else:
                parts.append(f'<polyline points="{" ".join(seg)}" fill="none" '
                             f'stroke="{color}" stroke-width="1.5"/>')
        ly = _MARGIN_T + 14 + 16 * s
        lx = _MARGIN_L + plot_w - 150
        parts.append(f'<line x1="{_fmt(lx)}" y1="{_fmt(ly - 4)}" x2="{_fmt(lx + 22)}" '
                     f'y2="{_fmt(ly - 4)}" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{_fmt(lx + 28)}" y="{_fmt(ly)}" font-family="sans-serif" '
                     f'font-size="11">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_svg(svg_text: str, path) -> None:
    with open(path, "w") as fh:
        fh.write(svg_text)
