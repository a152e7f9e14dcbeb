"""Deterministic SVG emission for boxplots, heatmaps, line plots and
histograms. No timestamps, random ids, or environment-dependent content:
identical inputs produce byte-identical files.

Heatmap cells carry a ``data-value`` attribute so emitted colors can be
checked against the inputs.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import ValidationError

MARGIN = 46.0
NUM = "%.6g"


def _fmt(x: float) -> str:
    return NUM % float(x)


class _Svg:
    def __init__(self, width: float, height: float):
        self.width = width
        self.height = height
        self.parts: list[str] = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
            f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
            f'<rect x="0" y="0" width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>',
        ]

    def rect(self, x, y, w, h, fill, extra: str = ""):
        self.parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" '
            f'fill="{fill}"{extra}/>'
        )

    def line(self, x1, y1, x2, y2, stroke="#000000", width=1.0):
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{stroke}" stroke-width="{_fmt(width)}"/>'
        )

    def polyline(self, points, stroke="#1f4e8c", width=1.5):
        coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
            f'stroke-width="{_fmt(width)}"/>'
        )

    def text(self, x, y, content, size=11, anchor="middle"):
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="sans-serif" '
            f'font-size="{_fmt(size)}" text-anchor="{anchor}">{content}</text>'
        )

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.parts.append("</svg>")
        path.write_text("\n".join(self.parts) + "\n", encoding="utf-8")
        return path


def _axis_scale(lo: float, hi: float):
    if hi <= lo:
        hi = lo + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _diverging_color(value: float, vmax: float) -> str:
    """Blue-white-red for values in [-vmax, vmax]."""
    if vmax <= 0:
        vmax = 1.0
    t = max(-1.0, min(1.0, value / vmax))
    if t >= 0:
        r, g, b = 255, round(255 * (1 - t)), round(255 * (1 - t))
    else:
        r, g, b = round(255 * (1 + t)), round(255 * (1 + t)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def _sequential_color(value: float, vmin: float, vmax: float) -> str:
    """White to dark blue; higher values are darker."""
    span = vmax - vmin
    t = 0.0 if span <= 0 else max(0.0, min(1.0, (value - vmin) / span))
    r = round(255 * (1 - 0.85 * t))
    g = round(255 * (1 - 0.70 * t))
    b = 255 - round(75 * t)
    return f"#{r:02x}{g:02x}{b:02x}"


def _quartiles(values: np.ndarray):
    q1, q2, q3 = np.quantile(values, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    lo = values[values >= q1 - 1.5 * iqr].min()
    hi = values[values <= q3 + 1.5 * iqr].max()
    return lo, q1, q2, q3, hi


def boxplot_svg(groups, path, title: str = "", hlines=(),
                width: float = 640.0, height: float = 360.0) -> Path:
    """``groups`` is a sequence of (label, values) pairs."""
    groups = [(str(label), np.asarray(vals, dtype=float).ravel()) for label, vals in groups]
    if not groups or any(v.size == 0 for _, v in groups):
        raise ValidationError("boxplot needs at least one non-empty group")
    all_values = np.concatenate([v for _, v in groups] + [np.asarray(hlines, dtype=float)])
    lo, hi = _axis_scale(float(np.min(all_values)), float(np.max(all_values)))
    svg = _Svg(width, height)
    plot_w = width - 2 * MARGIN
    plot_h = height - 2 * MARGIN

    def ypix(v):
        return MARGIN + plot_h * (1 - (v - lo) / (hi - lo))

    svg.line(MARGIN, MARGIN, MARGIN, height - MARGIN)
    svg.line(MARGIN, height - MARGIN, width - MARGIN, height - MARGIN)
    if title:
        svg.text(width / 2, MARGIN / 2, title, size=13)
    for tick in np.linspace(lo, hi, 5):
        svg.text(MARGIN - 6, ypix(tick) + 4, _fmt(tick), size=9, anchor="end")
    step = plot_w / len(groups)
    box_w = step * 0.6
    label_every = max(1, math.ceil(len(groups) / 24))
    for k, (label, values) in enumerate(groups):
        cx = MARGIN + step * (k + 0.5)
        wlo, q1, q2, q3, whi = _quartiles(values)
        svg.line(cx, ypix(wlo), cx, ypix(q1), stroke="#555555")
        svg.line(cx, ypix(q3), cx, ypix(whi), stroke="#555555")
        svg.rect(cx - box_w / 2, ypix(q3), box_w, max(ypix(q1) - ypix(q3), 0.5),
                 fill="#9db9d9")
        svg.line(cx - box_w / 2, ypix(q2), cx + box_w / 2, ypix(q2), stroke="#16325c", width=2.0)
        if k % label_every == 0:
            svg.text(cx, height - MARGIN + 14, label, size=9)
    for value in hlines:
        svg.line(MARGIN, ypix(value), width - MARGIN, ypix(value), stroke="#c03030")
    return svg.write(path)


def heatmap_svg(matrix, path, lower=None, labels=None, title: str = "",
                diverging: bool = True, cell: float = 0.0,
                width: float = 560.0) -> Path:
    """Square-matrix heatmap; pass ``lower`` to compose the upper triangle of
    ``matrix`` with the lower triangle of another matrix of equal shape."""
    m = np.asarray(matrix, dtype=float)
    if m.size == 0:
        raise ValidationError("heatmap needs a non-empty matrix")
    if m.ndim != 2:
        raise ValidationError("heatmap expects a matrix")
    if lower is not None:
        lower = np.asarray(lower, dtype=float)
        if lower.shape != m.shape or m.shape[0] != m.shape[1]:
            raise ValidationError("triangle composition needs equal square matrices")
        composed = m.copy()
        ii, jj = np.tril_indices(m.shape[0], k=-1)
        composed[ii, jj] = lower[ii, jj]
        m = composed
    rows, cols = m.shape
    if cell <= 0:
        cell = max(2.0, min(24.0, (width - 2 * MARGIN) / cols))
    w = 2 * MARGIN + cell * cols
    h = 2 * MARGIN + cell * rows
    svg = _Svg(w, h)
    if title:
        svg.text(w / 2, MARGIN / 2, title, size=13)
    finite = m[np.isfinite(m)]
    if finite.size == 0:
        raise ValidationError("heatmap matrix has no finite entries")
    if diverging:
        vmax = float(np.abs(finite).max()) or 1.0
    else:
        vmin, vmax = float(finite.min()), float(finite.max())
    for i in range(rows):
        for j in range(cols):
            value = m[i, j]
            if not np.isfinite(value):
                fill = "#dddddd"
                extra = ' data-value="nan"'
            else:
                fill = (_diverging_color(value, vmax) if diverging
                        else _sequential_color(value, vmin, vmax))
                extra = f' data-value="{_fmt(value)}"'
            svg.rect(MARGIN + j * cell, MARGIN + i * cell, cell, cell, fill, extra=extra)
    if labels is not None and len(labels) == rows == cols:
        tick = max(1, rows // 12)
        for i in range(0, rows, tick):
            svg.text(MARGIN - 4, MARGIN + (i + 0.7) * cell, str(labels[i]),
                     size=8, anchor="end")
    return svg.write(path)


def line_svg(series, path, title: str = "", hlines=(),
             width: float = 640.0, height: float = 360.0) -> Path:
    """``series`` is a sequence of (label, x_values, y_values) triples."""
    palette = ("#c03030", "#1f4e8c", "#2e8b57", "#8a2be2", "#b8860b", "#555555")
    cleaned = []
    for label, xs, ys in series:
        xs = np.asarray(xs, dtype=float).ravel()
        ys = np.asarray(ys, dtype=float).ravel()
        if xs.size != ys.size or xs.size == 0:
            raise ValidationError("line series must be non-empty and aligned")
        cleaned.append((str(label), xs, ys))
    if not cleaned:
        raise ValidationError("line plot needs at least one series")
    all_x = np.concatenate([xs for _, xs, _ in cleaned])
    all_y = np.concatenate([ys for _, _, ys in cleaned] + [np.asarray(hlines, dtype=float)])
    xlo, xhi = _axis_scale(float(all_x.min()), float(all_x.max()))
    ylo, yhi = _axis_scale(float(all_y.min()), float(all_y.max()))
    svg = _Svg(width, height)
    plot_w, plot_h = width - 2 * MARGIN, height - 2 * MARGIN

    def xpix(v):
        return MARGIN + plot_w * (v - xlo) / (xhi - xlo)

    def ypix(v):
        return MARGIN + plot_h * (1 - (v - ylo) / (yhi - ylo))

    svg.line(MARGIN, MARGIN, MARGIN, height - MARGIN)
    svg.line(MARGIN, height - MARGIN, width - MARGIN, height - MARGIN)
    if title:
        svg.text(width / 2, MARGIN / 2, title, size=13)
    for tick in np.linspace(ylo, yhi, 5):
        svg.text(MARGIN - 6, ypix(tick) + 4, _fmt(tick), size=9, anchor="end")
    for tick in np.linspace(xlo, xhi, 6):
        svg.text(xpix(tick), height - MARGIN + 14, _fmt(tick), size=9)
    for k, (label, xs, ys) in enumerate(cleaned):
        color = palette[k % len(palette)]
        svg.polyline(list(zip(map(xpix, xs), map(ypix, ys))), stroke=color)
        svg.text(width - MARGIN, MARGIN + 12 * (k + 1), label, size=10, anchor="end")
    for value in hlines:
        svg.line(MARGIN, ypix(value), width - MARGIN, ypix(value), stroke="#999999")
    return svg.write(path)


def histogram_svg(values, path, bins: int = 30, title: str = "",
                  width: float = 640.0, height: float = 360.0) -> Path:
    values = np.asarray(values, dtype=float).ravel()
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise ValidationError("histogram needs at least one finite value")
    counts, edges = np.histogram(values, bins=bins)
    svg = _Svg(width, height)
    plot_w, plot_h = width - 2 * MARGIN, height - 2 * MARGIN
    peak = counts.max() or 1
    if title:
        svg.text(width / 2, MARGIN / 2, title, size=13)
    svg.line(MARGIN, MARGIN, MARGIN, height - MARGIN)
    svg.line(MARGIN, height - MARGIN, width - MARGIN, height - MARGIN)
    bar_w = plot_w / counts.size
    for k, count in enumerate(counts):
        bar_h = plot_h * count / peak
        svg.rect(MARGIN + k * bar_w, height - MARGIN - bar_h, bar_w * 0.95, bar_h,
                 fill="#5b84b1", extra=f' data-value="{int(count)}"')
    for tick in np.linspace(edges[0], edges[-1], 6):
        x = MARGIN + plot_w * (tick - edges[0]) / max(edges[-1] - edges[0], 1e-300)
        svg.text(x, height - MARGIN + 14, _fmt(tick), size=9)
    return svg.write(path)


PLOT_KINDS = ("boxplot", "heatmap", "line", "histogram")


def emit_plot(data, kind: str, path, **options) -> Path:
    """Dispatch to one of the four plot kinds with schema validation."""
    if kind not in PLOT_KINDS:
        raise ValidationError(f"unknown plot kind {kind!r}")
    if kind == "boxplot":
        return boxplot_svg(data, path, **options)
    if kind == "heatmap":
        return heatmap_svg(data, path, **options)
    if kind == "line":
        return line_svg(data, path, **options)
    return histogram_svg(data, path, **options)
