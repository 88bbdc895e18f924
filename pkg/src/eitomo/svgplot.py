"""Minimal SVG output for curves and images, with no plotting dependency."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def line_plot(series, path, *, title: str = "", xlabel: str = "", ylabel: str = "", hline: float | None = None,
              width: int = 480, height: int = 320) -> Path:
    """Write a line plot.

    Parameters
    ----------
    series : iterable of (label, x, y)
    path : str or Path
    hline : float, optional
        Draw a dashed horizontal reference line at this value.
    """
    series = [(str(lab), np.asarray(x, float), np.asarray(y, float)) for lab, x, y in series]
    ml, mr, mt, mb = 56, 16, 28, 44
    xs = np.concatenate([s[1] for s in series])
    ys = np.concatenate([s[2] for s in series] + ([np.array([hline])] if hline is not None else []))
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{width / 2}" y="16" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{ml + pw / 2}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{mt + ph / 2}" text-anchor="middle" transform="rotate(-90 14 {mt + ph / 2})">{escape(ylabel)}</text>',
    ]
    for v in np.linspace(x0, x1, 5):
        out.append(f'<text x="{px(v):.1f}" y="{mt + ph + 14}" text-anchor="middle">{v:.3g}</text>')
    for v in np.linspace(y0, y1, 5):
        out.append(f'<text x="{ml - 4}" y="{py(v) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    if hline is not None:
        out.append(f'<line x1="{ml}" x2="{ml + pw}" y1="{py(hline):.1f}" y2="{py(hline):.1f}" stroke="#888" stroke-dasharray="4 3"/>')
    for k, (lab, x, y) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{ml + pw - 4}" y="{mt + 14 + 14 * k}" text-anchor="end" fill="{color}">{escape(lab)}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path


def heatmap(img, path, *, title: str = "", scale: int = 3) -> Path:
    """Write a grayscale image, one rect per pixel run, min..max mapped to black..white."""
    img = np.asarray(img, float)
    lo, hi = float(img.min()), float(img.max())
    g = np.zeros(img.shape, dtype=int) if hi == lo else np.rint((img - lo) / (hi - lo) * 255).astype(int)
    rows, cols = g.shape
    top = 20 if title else 0
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{cols * scale}" height="{rows * scale + top}" '
        f'font-family="sans-serif" font-size="12" shape-rendering="crispEdges">'
    ]
    if title:
        out.append(f'<text x="4" y="14">{escape(title)}</text>')
    for i in range(rows):
        j = 0
        while j < cols:
            k = j
            while k + 1 < cols and g[i, k + 1] == g[i, j]:
                k += 1
            v = g[i, j]
            out.append(
                f'<rect x="{j * scale}" y="{top + i * scale}" width="{(k - j + 1) * scale}" height="{scale}" fill="rgb({v},{v},{v})"/>'
            )
            j = k + 1
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path
