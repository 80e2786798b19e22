"""Hand-written SVG for log-log deviation-versus-m plots."""

import math
from xml.sax.saxutils import escape

import numpy as np

from .errors import SchemaError
from .experiments.report import rate_fit

WIDTH, HEIGHT = 480, 360
MARGIN = 60


def series(rows):
    """Median ``measured`` per ``m`` over rows with finite positive values, sorted by ``m``."""
    by_m = {}
    for r in rows:
        if math.isfinite(r.measured) and r.measured > 0:
            by_m.setdefault(r.m, []).append(r.measured)
    return [(m, float(np.median(v))) for m, v in sorted(by_m.items())]


def format_slope(slope):
    # typographic minus, as printed in the annotation
    return f"{slope:.3f}".replace("-", "−")


def render_svg(points, title="median deviation vs m"):
    """SVG 1.1 document with the series polyline, the fitted line and a slope label."""
    if len(points) < 2:
        raise SchemaError("a rate plot needs at least two distinct m values")
    fit = rate_fit(points)
    lx = np.log10([m for m, _ in points])
    ly = np.log10([v for _, v in points])
    x0, x1 = lx.min(), lx.max()
    y0, y1 = ly.min(), ly.max()
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    w, h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(v):
        return MARGIN + w * (v - x0) / (x1 - x0)

    def sy(v):
        return MARGIN + h * (1.0 - (v - y0) / (y1 - y0))

    pts = " ".join(f"{sx(a):.3f},{sy(b):.3f}" for a, b in zip(lx, ly))
    fy = [(fit.intercept + fit.slope * math.log(10**a)) / math.log(10) for a in (x0, x1)]
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{h}" fill="none" stroke="#888"/>',
        f'<text x="{WIDTH / 2:.1f}" y="{MARGIN / 2:.1f}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<polyline id="series" fill="none" stroke="#1f4e99" stroke-width="2" points="{pts}"/>',
        f'<line id="fit" x1="{sx(x0):.3f}" y1="{sy(fy[0]):.3f}" x2="{sx(x1):.3f}" y2="{sy(fy[1]):.3f}" '
        'stroke="#c0392b" stroke-dasharray="4 3"/>',
    ]
    for a, b in zip(lx, ly):
        out.append(f'<circle cx="{sx(a):.3f}" cy="{sy(b):.3f}" r="3" fill="#1f4e99"/>')
    out += [
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN / 3:.1f}" font-size="12">log10 m: {x0:.2f} to {x1:.2f}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{MARGIN + 16}" text-anchor="end" font-size="13" id="slope">'
        f"slope {format_slope(fit.slope)}</text>",
        f'<text x="{WIDTH - MARGIN}" y="{MARGIN + 32}" text-anchor="end" font-size="11">r² {fit.r_squared:.3f}</text>',
        "</svg>",
    ]
    return "\n".join(out) + "\n", fit


def polyline_points(svg):
    """``(x, y)`` pixel pairs of the series polyline in an SVG produced here."""
    start = svg.index('id="series"')
    seg = svg[start:]
    raw = seg[seg.index('points="') + 8 :]
    raw = raw[: raw.index('"')]
    return [tuple(float(c) for c in p.split(",")) for p in raw.split()]
