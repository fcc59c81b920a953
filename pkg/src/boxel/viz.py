"""Deterministic SVG drawing of a 2-D embedding."""
from __future__ import annotations

import colorsys
from xml.sax.saxutils import escape

import numpy as np

from .model import EmbeddingModel


class NotTwoDimensional(ValueError):
    pass


def _colour(i: int, n: int) -> str:
    r, g, b = colorsys.hsv_to_rgb(i / max(n, 1), 0.75, 0.8)
    return f"#{round(r * 255):02x}{round(g * 255):02x}{round(b * 255):02x}"


def render_svg(model: EmbeddingModel, size: int = 480, margin: int = 30) -> str:
    """One labelled rectangle per named concept, a dot per individual and the
    unit box as a dashed frame.  Output depends only on the parameters."""
    if model.dim != 2:
        raise NotTwoDimensional(f"can only draw 2-dimensional embeddings, this one has dim={model.dim}")
    concepts = [c for c in model.symbols.concepts if c not in model.fresh]
    boxes = [model.materialize_box(c) for c in concepts]
    pts = [model.point(a) for a in model.symbols.individuals]

    coords = [np.zeros(2), np.ones(2)]
    for b in boxes:
        coords += [b.lower, b.upper]
    coords += pts
    arr = np.array(coords)
    lo, hi = arr.min(axis=0), arr.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
    k = (size - 2 * margin) / span

    def sx(x):
        return margin + (x - lo[0]) * k

    def sy(y):
        return size - margin - (y - lo[1]) * k

    f = "{:.3f}".format
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}" font-family="sans-serif" font-size="11">',
           f'<rect x="{f(sx(0))}" y="{f(sy(1))}" width="{f(k)}" height="{f(k)}" '
           'fill="none" stroke="#999999" stroke-dasharray="4 3"/>']
    for i, (name, b) in enumerate(zip(concepts, boxes)):
        col = _colour(i, len(concepts))
        w = max(float(b.upper[0] - b.lower[0]), 0.0) * k
        h = max(float(b.upper[1] - b.lower[1]), 0.0) * k
        x, y = sx(b.lower[0]), sy(b.lower[1]) - h
        out.append(f'<rect x="{f(x)}" y="{f(y)}" width="{f(w)}" height="{f(h)}" '
                   f'fill="{col}" fill-opacity="0.08" stroke="{col}" stroke-width="1.5"/>')
        out.append(f'<text x="{f(x + 2)}" y="{f(y + 11)}" fill="{col}">{escape(name)}</text>')
    for a, p in zip(model.symbols.individuals, pts):
        out.append(f'<circle cx="{f(sx(p[0]))}" cy="{f(sy(p[1]))}" r="3" fill="#000000"/>')
        out.append(f'<text x="{f(sx(p[0]) + 4)}" y="{f(sy(p[1]) - 4)}">{escape(a)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
