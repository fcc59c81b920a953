"""Random geometries that satisfy or violate one normalized axiom.

Coordinates are dyadic (multiples of 1/32) and scales are powers of two, so
every box, map and container below is represented exactly and "contained"
means contained in floating point too.
"""
import numpy as np

from boxel import geometry as geo
from boxel import losses as L
from boxel.geometry import Box
from boxel.kb import Atomic, Bottom
from boxel.normalize import NF1, NF2, NF3, NF4, AssertConcept, AssertRole

from conftest import hand_model

EPS = 0.1
KINDS = ("concept_assertion", "role_assertion", "nf1", "nf1_bottom", "nf2", "nf2_disjoint",
         "nf3", "nf4")
A, B, C = Atomic("A"), Atomic("B"), Atomic("C")


def _dy(rng, lo, hi, size):
    return rng.integers(int(lo * 32), int(hi * 32) + 1, size) / 32


def _box(rng, n):
    lo = _dy(rng, -1, 1, n)
    return Box(lo, lo + _dy(rng, 1 / 32, 1, n))


def _grow(rng, b):
    n = b.lower.shape[0]
    return Box(b.lower - _dy(rng, 0, 0.25, n), b.upper + _dy(rng, 0, 0.25, n))


def _cut(rng, inner):
    """A box containing ``inner`` except on one face, which it crosses."""
    out = _grow(rng, inner)
    i = rng.integers(inner.lower.shape[0])
    side = inner.upper[i] - inner.lower[i]
    if rng.integers(2):
        out.lower[i] = inner.lower[i] + side / 2
    else:
        out.upper[i] = inner.upper[i] - side / 2
    return out


def _set(model, name, box):
    row = model.row_of(Atomic(name))
    model.params["concept_lower"][row] = box.lower
    model.params["concept_upper_delta"][row] = box.upper - box.lower


def _model(n, names=("A", "B", "C"), points=("a", "b"), rng=None):
    z = [0.0] * n
    scale = 2.0 ** rng.integers(-2, 3, n)
    offset = _dy(rng, -0.5, 0.5, n)
    return hand_model({k: (z, z) for k in names}, {p: z for p in points},
                      {"r": (scale, offset)}, dim=n, eps=EPS)


def build(kind, rng, satisfy):
    """(model, axiom) for one geometry; ``satisfy`` picks the side."""
    n = int(rng.integers(1, 5))
    m = _model(n, rng=rng)
    if kind == "concept_assertion":
        b = _box(rng, n)
        _set(m, "A", b)
        p = b.lower + (b.upper - b.lower) * _dy(rng, 0, 1, n)
        if not satisfy:
            i = rng.integers(n)
            p[i] = b.upper[i] + _dy(rng, 1 / 32, 1, 1)[0] if rng.integers(2) \
                else b.lower[i] - _dy(rng, 1 / 32, 1, 1)[0]
        m.params["entity_point"][0] = p
        return m, AssertConcept(A, "a")
    if kind == "role_assertion":
        pa = _dy(rng, -1, 1, n)
        m.params["entity_point"][0] = pa
        pb = geo.apply_point(m.materialize_affine("r"), pa)
        if not satisfy:
            pb = pb + np.eye(n)[rng.integers(n)] * _dy(rng, 1 / 32, 1, 1)[0]
        m.params["entity_point"][1] = pb
        return m, AssertRole("r", "a", "b")
    if kind == "nf1":
        b = _box(rng, n)
        _set(m, "A", b)
        _set(m, "B", _grow(rng, b) if satisfy else _cut(rng, b))
        return m, NF1(A, B)
    if kind == "nf1_bottom":
        b = _box(rng, n)
        if satisfy:
            i = rng.integers(n)
            b.upper[0] = b.lower[0] - EPS - _dy(rng, 1 / 32, 1, 1)[0]
            if i:  # also empty along a second axis now and then
                b.upper[i] = b.lower[i] - _dy(rng, 1 / 32, 1, 1)[0]
        _set(m, "A", b)
        return m, NF1(A, Bottom())
    if kind == "nf2":
        core = _box(rng, n)
        _set(m, "A", _grow(rng, core))
        _set(m, "B", _grow(rng, core))
        inter = geo.intersect(m.materialize_box(A), m.materialize_box(B))
        _set(m, "C", _grow(rng, inter) if satisfy else _cut(rng, inter))
        return m, NF2(A, B, C)
    if kind == "nf2_disjoint":
        b1 = _box(rng, n)
        if satisfy:
            b2 = _box(rng, n)
            i = rng.integers(n)
            w = b2.upper[i] - b2.lower[i]
            gap = EPS + _dy(rng, 1 / 32, 0.5, 1)[0]
            if rng.integers(2):
                b2.lower[i] = b1.upper[i] + gap
            else:
                b2.lower[i] = b1.lower[i] - gap - w
            b2.upper[i] = b2.lower[i] + w
        else:
            b2 = _grow(rng, Box(b1.lower + (b1.upper - b1.lower) / 2, b1.upper))
        _set(m, "A", b1)
        _set(m, "B", b2)
        return m, NF2(A, B, Bottom())
    if kind in ("nf3", "nf4"):
        b = _box(rng, n)
        _set(m, "A", b)
        t = m.materialize_affine("r")
        moved = geo.apply(t if kind == "nf3" else geo.inverse(t), m.materialize_box(A))
        _set(m, "B", _grow(rng, moved) if satisfy else _cut(rng, moved))
        return m, (NF3(A, "r", B) if kind == "nf3" else NF4("r", A, B))
    raise ValueError(kind)


def mvol_loss(model, ax, kind):
    comp = L.compile_axioms(model, [ax], skip_bottom=False)
    return float(np.sum(L.term_values(model, comp, vol="modified")[kind]))
