"""Minimal self-contained SVG line plots (no plotting dependency).

Good enough for the decay plots the CLI emits: linear x, optionally log y,
a few polylines, tick labels, and a legend.
"""

from __future__ import annotations

import math

__all__ = ["line_plot_svg"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 70, 20, 36, 52


def _ticks(lo, hi, n=6):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / max(n - 1, 1)))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * span:
        out.append(round(t, 12))
        t += step
    return out


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:g}"


def line_plot_svg(path, series, title="", xlabel="t", ylabel="", logy=True):
    """Write one SVG file with the given ``(label, x, y)`` series.

    With ``logy`` the y data is plotted as log10; nonpositive values are
    dropped from the plot (not from the data files).
    """
    prepared = []
    for label, xs, ys in series:
        pts = []
        for x, y in zip(xs, ys):
            if logy:
                if y is None or y <= 0 or not math.isfinite(y):
                    continue
                pts.append((float(x), math.log10(y)))
            else:
                if y is None or not math.isfinite(y):
                    continue
                pts.append((float(x), float(y)))
        if pts:
            prepared.append((label, pts))

    if prepared:
        xlo = min(p[0] for _, pts in prepared for p in pts)
        xhi = max(p[0] for _, pts in prepared for p in pts)
        ylo = min(p[1] for _, pts in prepared for p in pts)
        yhi = max(p[1] for _, pts in prepared for p in pts)
    else:
        xlo, xhi, ylo, yhi = 0.0, 1.0, 0.0, 1.0
    if xhi <= xlo:
        xhi = xlo + 1.0
    if yhi <= ylo:
        yhi = ylo + 1.0
    pad = 0.04 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    def sx(x):
        return _ML + (x - xlo) / (xhi - xlo) * (_W - _ML - _MR)

    def sy(y):
        return _H - _MB - (y - ylo) / (yhi - ylo) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W/2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    # axes box
    parts.append(
        f'<rect x="{_ML}" y="{_MT}" width="{_W-_ML-_MR}" height="{_H-_MT-_MB}" '
        'fill="none" stroke="black" stroke-width="1"/>'
    )
    for xt in _ticks(xlo, xhi):
        X = sx(xt)
        parts.append(f'<line x1="{X:.1f}" y1="{_H-_MB}" x2="{X:.1f}" y2="{_H-_MB+5}" stroke="black"/>')
        parts.append(f'<text x="{X:.1f}" y="{_H-_MB+18}" text-anchor="middle">{_fmt(xt)}</text>')
    for yt in _ticks(ylo, yhi):
        Y = sy(yt)
        label = f"1e{_fmt(yt)}" if logy else _fmt(yt)
        parts.append(f'<line x1="{_ML-5}" y1="{Y:.1f}" x2="{_ML}" y2="{Y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{_ML-8}" y="{Y+4:.1f}" text-anchor="end">{label}</text>')
    parts.append(
        f'<text x="{(_ML+_W-_MR)/2:.1f}" y="{_H-14}" text-anchor="middle">{xlabel}</text>'
    )
    if ylabel:
        parts.append(
            f'<text x="16" y="{(_MT+_H-_MB)/2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {(_MT+_H-_MB)/2:.1f})">{ylabel}</text>'
        )

    for i, (label, pts) in enumerate(prepared):
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        dash = ' stroke-dasharray="6,4"' if "reference" in label.lower() else ""
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>'
        )
        ly = _MT + 16 + 16 * i
        parts.append(f'<line x1="{_W-_MR-150}" y1="{ly-4}" x2="{_W-_MR-122}" y2="{ly-4}" stroke="{color}" stroke-width="2"{dash}/>')
        parts.append(f'<text x="{_W-_MR-116}" y="{ly}">{label}</text>')

    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
