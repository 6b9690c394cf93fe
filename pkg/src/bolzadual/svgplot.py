"""Minimal deterministic SVG writer: line plots and heatmaps.

Static figures only; every figure-producing command also writes the
underlying CSV, so these are derived artifacts.
"""

import math

import numpy as np

WIDTH, HEIGHT = 640, 440
MARGIN = 56


def _fmt(v):
    return format(float(v), ".6g")


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, count)
    return [float(t) for t in raw]


def _axes_svg(xlo, xhi, ylo, yhi, xlabel, ylabel, title):
    parts = []
    x0, y0 = MARGIN, HEIGHT - MARGIN
    x1, y1 = WIDTH - MARGIN, MARGIN
    parts.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
                 'fill="none" stroke="black" stroke-width="1"/>')
    for t in _ticks(xlo, xhi):
        px = x0 + (t - xlo) / (xhi - xlo) * (x1 - x0)
        parts.append(f'<line x1="{_fmt(px)}" y1="{y0}" x2="{_fmt(px)}" '
                     f'y2="{y0 + 5}" stroke="black"/>')
        parts.append(f'<text x="{_fmt(px)}" y="{y0 + 18}" font-size="11" '
                     f'text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(ylo, yhi):
        py = y0 - (t - ylo) / (yhi - ylo) * (y0 - y1)
        parts.append(f'<line x1="{x0 - 5}" y1="{_fmt(py)}" x2="{x0}" '
                     f'y2="{_fmt(py)}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 8}" y="{_fmt(py)}" font-size="11" '
                     f'text-anchor="end" dominant-baseline="middle">{_fmt(t)}</text>')
    parts.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 12}" font-size="12" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="16" y="{(y0 + y1) / 2}" font-size="12" '
                 f'text-anchor="middle" transform="rotate(-90 16 {(y0 + y1) / 2})">'
                 f'{ylabel}</text>')
    parts.append(f'<text x="{WIDTH / 2}" y="24" font-size="13" '
                 f'text-anchor="middle">{title}</text>')
    return parts


def line_plot(path, x, y, title="", xlabel="x", ylabel="y"):
    """Polyline plot; non-finite values split the line into segments."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    finite = np.isfinite(y)
    if not np.any(finite):
        raise ValueError("nothing finite to plot")
    xlo, xhi = float(np.min(x)), float(np.max(x))
    ylo = float(np.min(y[finite]))
    yhi = float(np.max(y[finite]))
    if yhi == ylo:
        yhi = ylo + 1.0
    x0, y0 = MARGIN, HEIGHT - MARGIN
    x1, y1 = WIDTH - MARGIN, MARGIN

    def px(v):
        return x0 + (v - xlo) / (xhi - xlo) * (x1 - x0)

    def py(v):
        return y0 - (v - ylo) / (yhi - ylo) * (y0 - y1)

    parts = ['<svg xmlns="http://www.w3.org/2000/svg" '
             f'width="{WIDTH}" height="{HEIGHT}">']
    parts += _axes_svg(xlo, xhi, ylo, yhi, xlabel, ylabel, title)
    seg = []
    segments = []
    for xi, yi in zip(x, y):
        if math.isfinite(yi):
            seg.append((px(xi), py(yi)))
        elif seg:
            segments.append(seg)
            seg = []
    if seg:
        segments.append(seg)
    for seg in segments:
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in seg)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#1f6fb2" '
                     'stroke-width="1.5"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def _shade(frac):
    """Blue-to-yellow two-ramp colormap as hex."""
    frac = min(max(frac, 0.0), 1.0)
    r = int(round(40 + 215 * frac))
    g = int(round(60 + 160 * frac))
    b = int(round(180 - 140 * frac))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(path, x_axis, y_axis, values, title="", xlabel="x0", ylabel="x1"):
    """Cell heatmap of a 2-D table; +inf cells are left unfilled."""
    values = np.asarray(values, dtype=float)
    finite = np.isfinite(values)
    if not np.any(finite):
        raise ValueError("nothing finite to plot")
    vlo = float(np.min(values[finite]))
    vhi = float(np.max(values[finite]))
    span = vhi - vlo if vhi > vlo else 1.0
    x0, y0 = MARGIN, HEIGHT - MARGIN
    x1, y1 = WIDTH - MARGIN, MARGIN
    nx, ny = values.shape
    cw = (x1 - x0) / nx
    ch = (y0 - y1) / ny
    parts = ['<svg xmlns="http://www.w3.org/2000/svg" '
             f'width="{WIDTH}" height="{HEIGHT}">']
    parts += _axes_svg(float(x_axis[0]), float(x_axis[-1]), float(y_axis[0]),
                       float(y_axis[-1]), xlabel, ylabel, title)
    for i in range(nx):
        for j in range(ny):
            v = values[i, j]
            if not math.isfinite(v):
                continue
            color = _shade((v - vlo) / span)
            cx = x0 + i * cw
            cy = y0 - (j + 1) * ch
            parts.append(f'<rect x="{_fmt(cx)}" y="{_fmt(cy)}" '
                         f'width="{_fmt(cw + 0.5)}" height="{_fmt(ch + 0.5)}" '
                         f'fill="{color}"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
