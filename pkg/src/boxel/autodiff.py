"""A small reverse-mode differentiator over numpy arrays.

Each :class:`Tensor` records the operation that produced it; ``backward``
walks the graph in reverse topological order.  The free functions below
(``maximum``, ``softplus``, ``prod``...) accept plain arrays too and then return
plain arrays computed by exactly the same numpy calls, so a loss evaluated
with and without gradient tracking is bitwise identical.

Subgradient conventions at kinks: ``relu``, ``abs`` and ``norm`` take 0 at 0,
``maximum``/``minimum`` route the whole gradient to the first argument on ties.
"""
from __future__ import annotations

from typing import Callable, Mapping

import numpy as np


class UnsupportedPrimitive(TypeError):
    pass


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "requires_grad")
    __array_priority__ = 100

    def __init__(self, data, parents=(), backward=None, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Tensor({self.data!r})"

    def item(self) -> float:
        return float(self.data)

    def backward(self, seed=None) -> None:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data) if seed is None else np.asarray(seed, dtype=np.float64)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        g = _unbroadcast(g, self.data.shape)
        self.grad = g.copy() if self.grad is None else self.grad + g

    # arithmetic
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs:
            raise UnsupportedPrimitive(f"{ufunc.__name__}.{method}")
        fn = _UFUNCS.get(ufunc)
        if fn is None:
            raise UnsupportedPrimitive(ufunc.__name__)
        return fn(*inputs)


def _is_t(x) -> bool:
    return isinstance(x, Tensor)


def _d(x):
    return x.data if isinstance(x, Tensor) else x


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value, parents, backward) -> Tensor:
    parents = tuple(p for p in parents if isinstance(p, Tensor))
    return Tensor(value, parents, backward)


def add(a, b):
    out = np.add(_d(a), _d(b))
    if not (_is_t(a) or _is_t(b)):
        return out

    def bw(g):
        if _is_t(a):
            a._accumulate(g)
        if _is_t(b):
            b._accumulate(g)
    return _node(out, (a, b), bw)


def sub(a, b):
    out = np.subtract(_d(a), _d(b))
    if not (_is_t(a) or _is_t(b)):
        return out

    def bw(g):
        if _is_t(a):
            a._accumulate(g)
        if _is_t(b):
            b._accumulate(-g)
    return _node(out, (a, b), bw)


def mul(a, b):
    ad, bd = _d(a), _d(b)
    out = np.multiply(ad, bd)
    if not (_is_t(a) or _is_t(b)):
        return out

    def bw(g):
        if _is_t(a):
            a._accumulate(g * bd)
        if _is_t(b):
            b._accumulate(g * ad)
    return _node(out, (a, b), bw)


def div(a, b):
    ad, bd = _d(a), _d(b)
    out = np.divide(ad, bd)
    if not (_is_t(a) or _is_t(b)):
        return out

    def bw(g):
        if _is_t(a):
            a._accumulate(g / bd)
        if _is_t(b):
            b._accumulate(-g * out / bd)
    return _node(out, (a, b), bw)


def neg(a):
    out = np.negative(_d(a))
    if not _is_t(a):
        return out
    return _node(out, (a,), lambda g: a._accumulate(-g))


def maximum(a, b):
    ad, bd = _d(a), _d(b)
    out = np.maximum(ad, bd)
    if not (_is_t(a) or _is_t(b)):
        return out
    pick_a = ad >= bd

    def bw(g):
        if _is_t(a):
            a._accumulate(np.where(pick_a, g, 0.0))
        if _is_t(b):
            b._accumulate(np.where(pick_a, 0.0, g))
    return _node(out, (a, b), bw)


def minimum(a, b):
    ad, bd = _d(a), _d(b)
    out = np.minimum(ad, bd)
    if not (_is_t(a) or _is_t(b)):
        return out
    pick_a = ad <= bd

    def bw(g):
        if _is_t(a):
            a._accumulate(np.where(pick_a, g, 0.0))
        if _is_t(b):
            b._accumulate(np.where(pick_a, 0.0, g))
    return _node(out, (a, b), bw)


def relu(a):
    ad = _d(a)
    out = np.maximum(ad, 0.0)
    if not _is_t(a):
        return out
    return _node(out, (a,), lambda g: a._accumulate(np.where(ad > 0, g, 0.0)))


def absolute(a):
    ad = _d(a)
    out = np.abs(ad)
    if not _is_t(a):
        return out
    return _node(out, (a,), lambda g: a._accumulate(g * np.sign(ad)))


def exp(a):
    out = np.exp(_d(a))
    if not _is_t(a):
        return out
    return _node(out, (a,), lambda g: a._accumulate(g * out))


def log(a):
    ad = _d(a)
    out = np.log(ad)
    if not _is_t(a):
        return out
    return _node(out, (a,), lambda g: a._accumulate(g / ad))


def log1p(a):
    ad = _d(a)
    out = np.log1p(ad)
    if not _is_t(a):
        return out
    return _node(out, (a,), lambda g: a._accumulate(g / (1.0 + ad)))


def sqrt(a):
    out = np.sqrt(_d(a))
    if not _is_t(a):
        return out
    return _node(out, (a,), lambda g: a._accumulate(g * 0.5 / out))


def square(a):
    ad = _d(a)
    out = np.multiply(ad, ad)
    if not _is_t(a):
        return out
    return _node(out, (a,), lambda g: a._accumulate(g * 2.0 * ad))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    ez = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))


def _softplus1(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def softplus(a, t: float = 1.0):
    """t * log(1 + exp(a / t)), overflow-safe."""
    z = np.divide(_d(a), t)
    out = t * _softplus1(z)
    if not _is_t(a):
        return out
    return _node(out, (a,), lambda g: a._accumulate(g * _sigmoid(z)))


_LOG_SP_CUTOFF = -30.0


def log_softplus(a, t: float = 1.0):
    """log(softplus_t(a)) without underflow for very negative ``a``."""
    z = np.divide(_d(a), t)
    tail = z < _LOG_SP_CUTOFF
    zs = np.where(tail, 0.0, z)
    sp = _softplus1(zs)
    # log(log1p(e^z)) -> z once e^z is below double precision relative to 1
    out = np.log(t) + np.where(tail, z, np.log(sp))
    if not _is_t(a):
        return out

    def bw(g):
        dz = np.where(tail, 1.0, _sigmoid(zs) / sp)
        a._accumulate(g * dz / t)
    return _node(out, (a,), bw)


def clip(a, lo: float, hi: float):
    ad = _d(a)
    out = np.clip(ad, lo, hi)
    if not _is_t(a):
        return out
    inside = (ad >= lo) & (ad <= hi)
    return _node(out, (a,), lambda g: a._accumulate(np.where(inside, g, 0.0)))


def where(cond, a, b):
    cond = np.asarray(cond, dtype=bool)
    out = np.where(cond, _d(a), _d(b))
    if not (_is_t(a) or _is_t(b)):
        return out

    def bw(g):
        if _is_t(a):
            a._accumulate(np.where(cond, g, 0.0))
        if _is_t(b):
            b._accumulate(np.where(cond, 0.0, g))
    return _node(out, (a, b), bw)


def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    ad = _d(a)
    out = np.sum(ad, axis=axis, keepdims=keepdims)
    if not _is_t(a):
        return out

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, ad.shape))
    return _node(out, (a,), bw)


def prod(a, axis=-1):
    """Product along one axis; the backward pass uses prefix/suffix products
    so zero factors do not produce NaNs."""
    ad = _d(a)
    out = np.prod(ad, axis=axis)
    if not _is_t(a):
        return out

    def bw(g):
        x = np.moveaxis(ad, axis, -1)
        ones = np.ones(x.shape[:-1] + (1,))
        before = np.cumprod(np.concatenate([ones, x[..., :-1]], axis=-1), axis=-1)
        after = np.flip(np.cumprod(np.flip(np.concatenate([x[..., 1:], ones], axis=-1), -1), axis=-1), -1)
        others = np.moveaxis(before * after, -1, axis)
        a._accumulate(np.expand_dims(g, axis) * others)
    return _node(out, (a,), bw)


def norm(a, axis=-1):
    """Euclidean norm along ``axis``; subgradient 0 at the origin."""
    ad = _d(a)
    out = np.sqrt(np.sum(np.multiply(ad, ad), axis=axis))
    if not _is_t(a):
        return out

    def bw(g):
        n = np.expand_dims(out, axis)
        safe = np.where(n > 0, n, 1.0)
        a._accumulate(np.where(n > 0, np.expand_dims(g, axis) * ad / safe, 0.0))
    return _node(out, (a,), bw)


def getitem(a, idx):
    ad = _d(a)
    out = ad[idx]
    if not _is_t(a):
        return out

    def bw(g):
        full = np.zeros_like(ad)
        np.add.at(full, idx, g)
        a._accumulate(full)
    return _node(out, (a,), bw)


def take(a, idx):
    """Rows ``a[idx]`` for an integer index array."""
    idx = np.asarray(idx, dtype=np.intp)
    return getitem(a, idx)


def concat(parts, axis=0):
    datas = [_d(p) for p in parts]
    out = np.concatenate(datas, axis=axis)
    if not any(_is_t(p) for p in parts):
        return out
    bounds = np.cumsum([0] + [d.shape[axis] for d in datas])

    def bw(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            if _is_t(p):
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                p._accumulate(g[tuple(sl)])
    return _node(out, parts, bw)


def value(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)


_UFUNCS = {
    np.add: add, np.subtract: sub, np.multiply: mul, np.true_divide: div,
    np.negative: neg, np.maximum: maximum, np.minimum: minimum, np.exp: exp,
    np.log: log, np.log1p: log1p, np.sqrt: sqrt, np.absolute: absolute,
    np.square: square,
}


def grad(fn: Callable[[dict[str, Tensor]], Tensor],
         params: Mapping[str, np.ndarray]) -> tuple[float, dict[str, np.ndarray]]:
    """Evaluate ``fn`` on tracked copies of ``params``; return (value, gradients).

    Parameters the output does not depend on get zero gradients.
    """
    tracked = {k: Tensor(np.array(v, dtype=np.float64), requires_grad=True)
               for k, v in params.items()}
    out = fn(tracked)
    if not isinstance(out, Tensor):
        return float(out), {k: np.zeros_like(v.data) for k, v in tracked.items()}
    if out.data.size != 1:
        raise ValueError("grad needs a scalar output")
    out.backward()
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data))
             for k, t in tracked.items()}
    return float(out.data), grads
