"""Self-contained SVG heatmaps and line charts.

Output is a pure function of the input: numbers are printed with fixed
precision and no timestamps or random ids are emitted.
"""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

# viridis anchor colors, low to high
_ANCHORS = np.array([
    [68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37],
], dtype=float)

_SERIES = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]


def color(t: float) -> str:
    """Hex color for ``t`` in [0, 1]; NaN maps to light gray."""
    if not np.isfinite(t):
        return "#dddddd"
    t = min(max(float(t), 0.0), 1.0) * (len(_ANCHORS) - 1)
    i = min(int(t), len(_ANCHORS) - 2)
    rgb = _ANCHORS[i] + (t - i) * (_ANCHORS[i + 1] - _ANCHORS[i])
    return "#" + "".join(f"{int(round(c)):02x}" for c in rgb)


def _num(x: float) -> str:
    return f"{x:.2f}"


def _label(x: float) -> str:
    return f"{x:.3g}"


def heatmap(
    values,
    x_values: Sequence[float],
    y_values: Sequence[float],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    vmin: float | None = None,
    vmax: float | None = None,
    cell: float = 24.0,
) -> str:
    """Heatmap of ``values[i, j]`` with column ``i`` at ``x_values[i]`` and row ``j`` at ``y_values[j]``.

    The color scale runs from the data minimum to the data maximum unless
    ``vmin``/``vmax`` are given. Rows are drawn with the largest y on top.
    """
    z = np.asarray(values, dtype=float)
    nx, ny = len(x_values), len(y_values)
    if z.shape != (nx, ny):
        raise ValueError(f"values shape {z.shape} does not match axes ({nx}, {ny})")
    finite = z[np.isfinite(z)]
    lo = float(finite.min()) if vmin is None and finite.size else (vmin if vmin is not None else 0.0)
    hi = float(finite.max()) if vmax is None and finite.size else (vmax if vmax is not None else 1.0)
    span = hi - lo if hi > lo else 1.0
    left, top, bar = 70.0, 40.0, 16.0
    width = left + nx * cell + 90.0
    height = top + ny * cell + 60.0
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(width)}" height="{_num(height)}" '
        f'viewBox="0 0 {_num(width)} {_num(height)}" font-family="sans-serif" font-size="10">',
        f'<text x="{_num(left)}" y="20" font-size="13">{escape(title)}</text>',
    ]
    for i in range(nx):
        for j in range(ny):
            v = z[i, j]
            x = left + i * cell
            y = top + (ny - 1 - j) * cell
            out.append(
                f'<rect class="cell" x="{_num(x)}" y="{_num(y)}" width="{_num(cell)}" height="{_num(cell)}" '
                f'fill="{color((v - lo) / span)}" data-value="{float(v)!r}"/>'
            )
    step_x = max(1, nx // 8)
    for i in range(0, nx, step_x):
        x = left + (i + 0.5) * cell
        out.append(f'<text x="{_num(x)}" y="{_num(top + ny * cell + 14)}" text-anchor="middle">'
                   f'{_label(x_values[i])}</text>')
    step_y = max(1, ny // 8)
    for j in range(0, ny, step_y):
        y = top + (ny - 1 - j + 0.5) * cell + 3
        out.append(f'<text x="{_num(left - 6)}" y="{_num(y)}" text-anchor="end">{_label(y_values[j])}</text>')
    out.append(f'<text x="{_num(left + nx * cell / 2)}" y="{_num(top + ny * cell + 32)}" '
               f'text-anchor="middle">{escape(x_label)}</text>')
    out.append(f'<text x="16" y="{_num(top + ny * cell / 2)}" text-anchor="middle" '
               f'transform="rotate(-90 16 {_num(top + ny * cell / 2)})">{escape(y_label)}</text>')
    # color bar, 20 bands from the scale minimum (bottom) to maximum (top)
    bx = left + nx * cell + 20
    bands = 20
    bh = ny * cell / bands
    for k in range(bands):
        y = top + (bands - 1 - k) * bh
        out.append(f'<rect x="{_num(bx)}" y="{_num(y)}" width="{_num(bar)}" height="{_num(bh)}" '
                   f'fill="{color(k / (bands - 1))}"/>')
    out.append(f'<text class="vmax" x="{_num(bx + bar + 4)}" y="{_num(top + 8)}">{_label(hi)}</text>')
    out.append(f'<text class="vmin" x="{_num(bx + bar + 4)}" y="{_num(top + ny * cell)}">{_label(lo)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def curve(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    width: float = 480.0,
    height: float = 320.0,
) -> str:
    """Line chart; each series is ``(name, xs, ys)``."""
    if not series:
        raise ValueError("nothing to plot")
    xs = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ys = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    x0, x1 = float(np.nanmin(xs)), float(np.nanmax(xs))
    y0, y1 = float(np.nanmin(ys)), float(np.nanmax(ys))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    left, right, top, bottom = 60.0, 120.0, 36.0, 44.0
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(width)}" height="{_num(height)}" '
        f'viewBox="0 0 {_num(width)} {_num(height)}" font-family="sans-serif" font-size="10">',
        f'<text x="{_num(left)}" y="20" font-size="13">{escape(title)}</text>',
        f'<rect x="{_num(left)}" y="{_num(top)}" width="{_num(pw)}" height="{_num(ph)}" fill="none" stroke="#444"/>',
    ]
    for k in range(5):
        xv = x0 + k * (x1 - x0) / 4
        yv = y0 + k * (y1 - y0) / 4
        out.append(f'<text x="{_num(px(xv))}" y="{_num(top + ph + 14)}" text-anchor="middle">{_label(xv)}</text>')
        out.append(f'<text x="{_num(left - 6)}" y="{_num(py(yv) + 3)}" text-anchor="end">{_label(yv)}</text>')
    for n, (name, sx, sy) in enumerate(series):
        pts = " ".join(f"{_num(px(a))},{_num(py(b))}" for a, b in zip(sx, sy) if np.isfinite(a) and np.isfinite(b))
        c = _SERIES[n % len(_SERIES)]
        out.append(f'<polyline class="series" fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 12 + 14 * n
        out.append(f'<line x1="{_num(left + pw + 10)}" y1="{_num(ly)}" x2="{_num(left + pw + 26)}" '
                   f'y2="{_num(ly)}" stroke="{c}" stroke-width="1.5"/>')
        out.append(f'<text x="{_num(left + pw + 30)}" y="{_num(ly + 3)}">{escape(name)}</text>')
    out.append(f'<text x="{_num(left + pw / 2)}" y="{_num(height - 8)}" text-anchor="middle">{escape(x_label)}</text>')
    out.append(f'<text x="14" y="{_num(top + ph / 2)}" text-anchor="middle" '
               f'transform="rotate(-90 14 {_num(top + ph / 2)})">{escape(y_label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
