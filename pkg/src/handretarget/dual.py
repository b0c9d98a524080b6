"""Forward-mode differentiation on numpy arrays.

A :class:`Dual` pairs a value array of shape ``S`` with a tangent array of
shape ``S + (n_dirs,)`` holding the directional derivatives of the value
against ``n_dirs`` fixed seed directions.  Arithmetic and a curated set of
numpy ufuncs/functions propagate tangents, so numerical code written against
plain ndarrays also runs on duals unchanged.

Plain arrays and scalars mixed into an operation are treated as constants
(zero tangent).  ``np.maximum``/``np.minimum`` use the subgradient-0
convention at ties.
"""

from __future__ import annotations

import numpy as np

_HANDLED_UFUNCS = {}
_HANDLED_FUNCTIONS = {}


def value_of(x):
    """Value array of ``x`` whether it is a Dual or a plain array/scalar."""
    return x.val if isinstance(x, Dual) else np.asarray(x)


class Dual:
    """Array value plus per-direction tangents (trailing axis)."""

    __slots__ = ("val", "dot")

    def __init__(self, val, dot):
        self.val = np.asarray(val, dtype=float)
        self.dot = np.asarray(dot, dtype=float)
        if self.dot.shape[:-1] != self.val.shape:
            raise ValueError(
                f"tangent shape {self.dot.shape} does not extend value shape {self.val.shape}"
            )

    @property
    def n_dirs(self):
        return self.dot.shape[-1]

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    @classmethod
    def seed_identity(cls, val):
        """Seed every element of ``val`` as an independent direction."""
        val = np.asarray(val, dtype=float)
        n = val.size
        return cls(val, np.eye(n).reshape(val.shape + (n,)))

    def constant_like(self, val):
        val = np.asarray(val, dtype=float)
        return Dual(val, np.zeros(val.shape + (self.n_dirs,)))

    def __repr__(self):
        return f"Dual(val={self.val!r}, n_dirs={self.n_dirs})"

    # -- indexing ----------------------------------------------------------

    def _expand_index(self, idx):
        # Resolve Ellipsis against the value ndim so the tangent axis is
        # never touched by user indexing.
        if not isinstance(idx, tuple):
            idx = (idx,)
        if Ellipsis in idx:
            pos = idx.index(Ellipsis)
            explicit = sum(1 for i in idx if i is not None and i is not Ellipsis)
            fill = (slice(None),) * (self.val.ndim - explicit)
            idx = idx[:pos] + fill + idx[pos + 1 :]
        return idx

    def __getitem__(self, idx):
        idx = self._expand_index(idx)
        return Dual(self.val[idx], self.dot[idx])

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        return _add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return _sub(self, other)

    def __rsub__(self, other):
        return _sub(other, self)

    def __mul__(self, other):
        return _mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _div(self, other)

    def __rtruediv__(self, other):
        return _div(other, self)

    def __neg__(self):
        return Dual(-self.val, -self.dot)

    def __pow__(self, n):
        if n != 2:
            raise NotImplementedError("only squaring is supported on duals")
        return _mul(self, self)

    # -- numpy protocols ---------------------------------------------------

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs:
            return NotImplemented
        handler = _HANDLED_UFUNCS.get(ufunc)
        if handler is None:
            return NotImplemented
        return handler(*inputs)

    def __array_function__(self, func, types, args, kwargs):
        handler = _HANDLED_FUNCTIONS.get(func)
        if handler is None:
            return NotImplemented
        return handler(*args, **kwargs)

    # -- reductions / shaping ----------------------------------------------

    def sum(self, axis=None, keepdims=False):
        axes = _normalize_axes(axis, self.val.ndim)
        return Dual(
            self.val.sum(axis=axes, keepdims=keepdims),
            self.dot.sum(axis=axes, keepdims=keepdims),
        )

    def mean(self, axis=None, keepdims=False):
        axes = _normalize_axes(axis, self.val.ndim)
        return Dual(
            self.val.mean(axis=axes, keepdims=keepdims),
            self.dot.mean(axis=axes, keepdims=keepdims),
        )

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        val = self.val.reshape(shape)
        return Dual(val, self.dot.reshape(val.shape + (self.n_dirs,)))


def _normalize_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if np.isscalar(axis):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def _parts(x, n_dirs):
    """(value, tangent-or-None) of an operand; None marks a constant."""
    if isinstance(x, Dual):
        return x.val, x.dot
    return np.asarray(x, dtype=float), None


def _dirs_of(*xs):
    for x in xs:
        if isinstance(x, Dual):
            return x.n_dirs
    raise TypeError("no Dual operand")


def _expand(dot, val, n):
    want = val.shape + (n,)
    return dot if dot.shape == want else np.broadcast_to(dot, want)


def _add(a, b):
    n = _dirs_of(a, b)
    av, ad = _parts(a, n)
    bv, bd = _parts(b, n)
    val = av + bv
    if ad is None:
        dot = bd
    elif bd is None:
        dot = ad
    else:
        dot = ad + bd
    return Dual(val, _expand(dot, val, n))


def _sub(a, b):
    n = _dirs_of(a, b)
    av, ad = _parts(a, n)
    bv, bd = _parts(b, n)
    val = av - bv
    if ad is None:
        dot = -bd
    elif bd is None:
        dot = ad
    else:
        dot = ad - bd
    return Dual(val, _expand(dot, val, n))


def _mul(a, b):
    n = _dirs_of(a, b)
    av, ad = _parts(a, n)
    bv, bd = _parts(b, n)
    val = av * bv
    if ad is None:
        dot = av[..., None] * bd
    elif bd is None:
        dot = ad * bv[..., None]
    else:
        dot = ad * bv[..., None] + av[..., None] * bd
    return Dual(val, _expand(dot, val, n))


def _div(a, b):
    n = _dirs_of(a, b)
    av, ad = _parts(a, n)
    bv, bd = _parts(b, n)
    val = av / bv
    if bd is None:
        dot = ad / bv[..., None]
    else:
        num = ad * bv[..., None] - av[..., None] * bd if ad is not None else -av[..., None] * bd
        dot = num / (bv * bv)[..., None]
    return Dual(val, _expand(dot, val, n))


def _neg(a):
    return -a


def _sqrt(a):
    val = np.sqrt(a.val)
    dot = a.dot / (2.0 * val)[..., None]
    return Dual(val, dot)


def _exp(a):
    val = np.exp(a.val)
    return Dual(val, val[..., None] * a.dot)


def _sin(a):
    return Dual(np.sin(a.val), np.cos(a.val)[..., None] * a.dot)


def _cos(a):
    return Dual(np.cos(a.val), -np.sin(a.val)[..., None] * a.dot)


def _maximum(a, b):
    n = _dirs_of(a, b)
    av, ad = _parts(a, n)
    bv, bd = _parts(b, n)
    val = np.maximum(av, bv)
    take_a = np.broadcast_to(av > bv, val.shape)
    zeros = np.zeros(val.shape + (n,))
    da = np.broadcast_to(ad, val.shape + (n,)) if ad is not None else zeros
    db = np.broadcast_to(bd, val.shape + (n,)) if bd is not None else zeros
    # ties take the second operand's tangent; penalty kinks pass constants
    # there, so the subgradient-0 convention holds where it matters
    dot = np.where(take_a[..., None], da, db)
    return Dual(val, dot)


def _minimum(a, b):
    n = _dirs_of(a, b)
    av, ad = _parts(a, n)
    bv, bd = _parts(b, n)
    val = np.minimum(av, bv)
    take_a = np.broadcast_to(av < bv, val.shape)
    zeros = np.zeros(val.shape + (n,))
    da = np.broadcast_to(ad, val.shape + (n,)) if ad is not None else zeros
    db = np.broadcast_to(bd, val.shape + (n,)) if bd is not None else zeros
    dot = np.where(take_a[..., None], da, db)
    return Dual(val, dot)


def _arctan2(y, x):
    n = _dirs_of(y, x)
    yv, yd = _parts(y, n)
    xv, xd = _parts(x, n)
    val = np.arctan2(yv, xv)
    den = (xv * xv + yv * yv)[..., None]
    dot = 0.0
    if yd is not None:
        dot = xv[..., None] * yd / den
    if xd is not None:
        dot = dot - yv[..., None] * xd / den
    return Dual(val, _expand(dot, val, n))


def _stack(arrays, axis=0):
    n = _dirs_of(*arrays)
    vals = [value_of(a) for a in arrays]
    dots = [
        a.dot if isinstance(a, Dual) else np.zeros(value_of(a).shape + (n,))
        for a in arrays
    ]
    out_ndim = vals[0].ndim + 1
    axis = axis % out_ndim
    return Dual(np.stack(vals, axis=axis), np.stack(dots, axis=axis))


def _concatenate(arrays, axis=0):
    n = _dirs_of(*arrays)
    vals = [value_of(a) for a in arrays]
    dots = [
        a.dot if isinstance(a, Dual) else np.zeros(value_of(a).shape + (n,))
        for a in arrays
    ]
    axis = axis % vals[0].ndim
    return Dual(np.concatenate(vals, axis=axis), np.concatenate(dots, axis=axis))


def _sum(a, axis=None, keepdims=False):
    return a.sum(axis=axis, keepdims=keepdims)


def _mean(a, axis=None, keepdims=False):
    return a.mean(axis=axis, keepdims=keepdims)


def _where(cond, a, b):
    n = _dirs_of(a, b)
    cond = np.asarray(cond)
    av, ad = _parts(a, n)
    bv, bd = _parts(b, n)
    val = np.where(cond, av, bv)
    zeros = np.zeros(val.shape + (n,))
    da = np.broadcast_to(ad, val.shape + (n,)) if ad is not None else zeros
    db = np.broadcast_to(bd, val.shape + (n,)) if bd is not None else zeros
    cshape = np.broadcast_to(cond, val.shape)
    return Dual(val, np.where(cshape[..., None], da, db))


def _moveaxis(a, source, destination):
    src = source % a.val.ndim
    dst = destination % a.val.ndim
    return Dual(np.moveaxis(a.val, src, dst), np.moveaxis(a.dot, src, dst))


_HANDLED_UFUNCS.update(
    {
        np.add: _add,
        np.subtract: _sub,
        np.multiply: _mul,
        np.true_divide: _div,
        np.negative: _neg,
        np.sqrt: _sqrt,
        np.exp: _exp,
        np.sin: _sin,
        np.cos: _cos,
        np.maximum: _maximum,
        np.minimum: _minimum,
        np.arctan2: _arctan2,
    }
)

_HANDLED_FUNCTIONS.update(
    {
        np.stack: _stack,
        np.concatenate: _concatenate,
        np.sum: _sum,
        np.mean: _mean,
        np.where: _where,
        np.moveaxis: _moveaxis,
    }
)
