"""Minimal SVG step plots for CDFs and bar charts, no plotting dependency."""

from xml.sax.saxutils import escape

import numpy as np

__all__ = ["cdf_svg", "bars_svg"]

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
W, H, PAD = 480, 320, 48


def _frame(title, xlabel, ylabel, x0, x1, y0, y1):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="16" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD / 2}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD / 2}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="12" y="{H / 2}" transform="rotate(-90 12 {H / 2})" text-anchor="middle">{escape(ylabel)}</text>',
        f'<text x="{PAD}" y="{H - PAD + 14}" text-anchor="middle">{x0:.4g}</text>',
        f'<text x="{W - PAD / 2}" y="{H - PAD + 14}" text-anchor="middle">{x1:.4g}</text>',
        f'<text x="{PAD - 4}" y="{H - PAD}" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{PAD - 4}" y="{PAD / 2 + 4}" text-anchor="end">{y1:.3g}</text>',
    ]
    return parts


def _scale(x0, x1, y0, y1):
    sx = (W - 1.5 * PAD) / (x1 - x0 or 1.0)
    sy = (H - 1.5 * PAD) / (y1 - y0 or 1.0)
    return lambda x: PAD + (x - x0) * sx, lambda y: H - PAD - (y - y0) * sy


def cdf_svg(curves, title="CDF", xlabel="value"):
    """Step plot of ``{label: (x, F)}`` empirical CDFs."""
    xs = np.concatenate([np.asarray(c[0], dtype=float) for c in curves.values()])
    x0, x1 = float(xs.min()), float(xs.max())
    if x1 == x0:
        x1 = x0 + 1.0
    fx, fy = _scale(x0, x1, 0.0, 1.0)
    parts = _frame(title, xlabel, "F", x0, x1, 0.0, 1.0)
    for i, (label, (x, F)) in enumerate(curves.items()):
        x, F = np.asarray(x, dtype=float), np.asarray(F, dtype=float)
        pts, prev = [f"{fx(x0):.1f},{fy(0):.1f}"], 0.0
        for xi, Fi in zip(x, F):
            pts.append(f"{fx(xi):.1f},{fy(prev):.1f}")
            pts.append(f"{fx(xi):.1f},{fy(Fi):.1f}")
            prev = Fi
        pts.append(f"{fx(x1):.1f},{fy(prev):.1f}")
        color = COLORS[i % len(COLORS)]
        parts.append(f'<polyline fill="none" stroke="{color}" points="{" ".join(pts)}"/>')
        parts.append(f'<text x="{W - PAD}" y="{PAD + 14 * i}" fill="{color}" text-anchor="end">{escape(str(label))}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def bars_svg(values, title="energy", ylabel="kWh"):
    """Grouped bars for ``{group: {series: value}}``."""
    groups = list(values)
    series = sorted({s for g in groups for s in values[g]})
    top = max([v for g in groups for v in values[g].values()] + [1e-12])
    _, fy = _scale(0, 1, 0.0, top)
    parts = _frame(title, "", ylabel, 0, 0, 0.0, top)
    slot = (W - 1.5 * PAD) / max(len(groups), 1)
    bw = slot / (len(series) + 1)
    for gi, g in enumerate(groups):
        for si, s in enumerate(series):
            v = values[g].get(s, 0.0)
            x = PAD + gi * slot + (si + 0.5) * bw
            parts.append(f'<rect x="{x:.1f}" y="{fy(v):.1f}" width="{bw * 0.9:.1f}" '
                         f'height="{fy(0) - fy(v):.1f}" fill="{COLORS[si % len(COLORS)]}"/>')
        parts.append(f'<text x="{PAD + (gi + 0.5) * slot:.1f}" y="{H - PAD + 28}" text-anchor="middle">{escape(str(g))}</text>')
    for si, s in enumerate(series):
        parts.append(f'<text x="{W - PAD}" y="{PAD + 14 * si}" fill="{COLORS[si % len(COLORS)]}" text-anchor="end">{escape(s)}</text>')
    parts.append("</svg>")
    return "\n".join(parts)
