"""Axis-parallel boxes, volumes and diagonal affine maps.

Everything here operates on the last axis, so a ``Box`` may hold a single box
(shape ``(n,)``) or a batch (shape ``(B, n)``), and the coordinates may be plain
arrays or :class:`~boxel.autodiff.Tensor` values.  No ordering between lower
and upper corners is enforced: a side with ``upper < lower`` encodes an empty
box.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import autodiff as ad

SCALE_FLOOR = 1e-8


class DimensionMismatch(ValueError):
    pass


class SingularScale(ValueError):
    pass


class DivisionByZero(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class VolumeConfig:
    epsilon: float = 0.1
    temperature: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")


@dataclass(frozen=True, eq=False)
class Box:
    lower: object
    upper: object

    def __post_init__(self):
        if np.shape(ad.value(self.lower)) != np.shape(ad.value(self.upper)):
            raise DimensionMismatch("lower and upper corners differ in shape")

    @classmethod
    def of(cls, lower, upper) -> "Box":
        return cls(np.asarray(lower, dtype=np.float64), np.asarray(upper, dtype=np.float64))

    @classmethod
    def point(cls, p) -> "Box":
        p = np.asarray(p, dtype=np.float64)
        return cls(p, p)

    @property
    def dim(self) -> int:
        return np.shape(ad.value(self.lower))[-1]

    @property
    def sides(self):
        return self.upper - self.lower

    def is_empty(self) -> np.ndarray:
        return np.any(ad.value(self.upper) < ad.value(self.lower), axis=-1)

    def numpy(self) -> "Box":
        return Box(np.array(ad.value(self.lower)), np.array(ad.value(self.upper)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Box):
            return NotImplemented
        return (np.array_equal(ad.value(self.lower), ad.value(other.lower))
                and np.array_equal(ad.value(self.upper), ad.value(other.upper)))

    def __repr__(self) -> str:
        return f"Box({ad.value(self.lower).tolist()}, {ad.value(self.upper).tolist()})"


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> scale * x + offset with a positive diagonal scale."""
    scale: object
    offset: object

    @classmethod
    def of(cls, scale, offset) -> "AffineMap":
        return cls(np.asarray(scale, dtype=np.float64), np.asarray(offset, dtype=np.float64))

    @classmethod
    def identity(cls, n: int) -> "AffineMap":
        return cls(np.ones(n), np.zeros(n))

    def __repr__(self) -> str:
        return f"AffineMap({ad.value(self.scale).tolist()}, {ad.value(self.offset).tolist()})"


def _check_dims(*shapes) -> None:
    dims = {np.shape(ad.value(s))[-1] for s in shapes}
    if len(dims) > 1:
        raise DimensionMismatch(f"dimension mismatch: {sorted(dims)}")


def intersect(b1: Box, b2: Box) -> Box:
    _check_dims(b1.lower, b2.lower)
    return Box(ad.maximum(b1.lower, b2.lower), ad.minimum(b1.upper, b2.upper))


def mvol(b: Box, cfg: VolumeConfig = VolumeConfig()):
    """Product of max(0, side + epsilon): a point has volume epsilon**n."""
    return ad.prod(ad.relu(b.sides + cfg.epsilon), axis=-1)


def hard_vol(b: Box):
    return ad.prod(ad.relu(b.sides), axis=-1)


def svol(b: Box, cfg: VolumeConfig = VolumeConfig()):
    """Product of softplus_t(side)."""
    return ad.prod(ad.softplus(b.sides, cfg.temperature), axis=-1)


def log_svol(b: Box, cfg: VolumeConfig = VolumeConfig()):
    return ad.sum(ad.log_softplus(b.sides, cfg.temperature), axis=-1)


VolumeFn = Callable[[Box], object]
Volume = Union[str, VolumeFn]


def volume_ratio(num: Box, den: Box, cfg: VolumeConfig, vol: Volume = "soft"):
    """vol(num) / vol(den).

    The softplus ratio is formed in log space; with many dimensions or a small
    temperature the individual volumes under- or overflow.
    """
    if vol == "soft":
        return ad.exp(log_svol(num, cfg) - log_svol(den, cfg))
    if vol == "modified":
        top, bottom = mvol(num, cfg), mvol(den, cfg)
    elif callable(vol):
        top, bottom = vol(num), vol(den)
    else:
        raise ValueError(f"unknown volume {vol!r}")
    if np.any(ad.value(bottom) == 0):
        raise DivisionByZero("reference box has zero volume")
    return top / bottom


def disjoint_measure(b1: Box, b2: Box, cfg: VolumeConfig = VolumeConfig(),
                     vol: Volume = "soft", clamp: bool = True):
    """1 - vol(b1 ∩ b2) / vol(b1); 0 certifies b1 ⊆ b2, 1 certifies disjointness."""
    d = 1.0 - volume_ratio(intersect(b1, b2), b1, cfg, vol)
    return ad.clip(d, 0.0, 1.0) if clamp else d


def apply(t: AffineMap, b: Box) -> Box:
    _check_dims(t.scale, b.lower)
    return Box(t.scale * b.lower + t.offset, t.scale * b.upper + t.offset)


def apply_point(t: AffineMap, p):
    _check_dims(t.scale, p)
    return t.scale * p + t.offset


def inverse(t: AffineMap) -> AffineMap:
    """y = s*x + b  =>  x = (1/s)*y - b/s."""
    if np.any(ad.value(t.scale) < SCALE_FLOOR):
        raise SingularScale(f"scale below {SCALE_FLOOR} cannot be inverted")
    inv = 1.0 / t.scale
    return AffineMap(inv, -(t.offset * inv))


def compose(t2: AffineMap, t1: AffineMap) -> AffineMap:
    """The map x -> t2(t1(x))."""
    return AffineMap(t2.scale * t1.scale, t2.scale * t1.offset + t2.offset)


def contains(outer: Box, inner: Box, tol: float = 0.0) -> np.ndarray:
    """inner ⊆ outer up to ``tol`` per face; empty boxes are contained in anything."""
    _check_dims(outer.lower, inner.lower)
    ol, ou = ad.value(outer.lower), ad.value(outer.upper)
    il, iu = ad.value(inner.lower), ad.value(inner.upper)
    inside = np.all((ol - tol <= il) & (iu <= ou + tol), axis=-1)
    return inside | inner.is_empty()


def containment_violation(outer: Box, inner: Box) -> np.ndarray:
    """Largest distance by which a face of ``inner`` sticks out of ``outer``
    (0 when contained or when ``inner`` is empty)."""
    ol, ou = ad.value(outer.lower), ad.value(outer.upper)
    il, iu = ad.value(inner.lower), ad.value(inner.upper)
    out = np.maximum(np.max(ol - il, axis=-1), np.max(iu - ou, axis=-1))
    return np.where(inner.is_empty(), 0.0, np.maximum(out, 0.0))



def unit_box(n: int) -> Box:
    return Box(np.zeros(n), np.ones(n))
