"""Forward-mode dual numbers carrying k directional derivatives.

A Dual2 holds the value, the first directional derivatives d1 (leading axis
indexes the k seed directions) and optionally the second directional
derivatives d2 along the same pure directions (no cross terms).  With
d2=None the arithmetic degrades to plain first-order forward mode, which is
what the latent-Jacobian assembly uses.
"""

import numpy as np

from . import ops


def _val(x):
    return x.val if isinstance(x, Dual2) else np.asarray(x, dtype=np.float64)


def _expand_dirs(d, val_ndim, out_ndim):
    """Insert broadcast axes between the direction axis and the value axes."""
    if d is None or out_ndim == val_ndim:
        return d
    return d.reshape((d.shape[0],) + (1,) * (out_ndim - val_ndim) + d.shape[1:])


class Dual2:
    __slots__ = ("val", "d1", "d2")
    __array_ufunc__ = None

    def __init__(self, val, d1, d2=None):
        self.val = np.asarray(val, dtype=np.float64)
        self.d1 = np.asarray(d1, dtype=np.float64)
        self.d2 = None if d2 is None else np.asarray(d2, dtype=np.float64)

    @property
    def k(self):
        return self.d1.shape[0]

    def __repr__(self):
        return f"Dual2(shape={self.val.shape}, k={self.k}, second={self.d2 is not None})"

    # -- helpers ----------------------------------------------------------
    def _dirs_for(self, out_shape):
        """d1/d2 views broadcast against the combined value shape."""
        k = self.d1.shape[0]
        d1 = np.broadcast_to(
            _expand_dirs(self.d1, self.val.ndim, len(out_shape)), (k,) + out_shape
        )
        d2 = self.d2
        if d2 is not None:
            d2 = np.broadcast_to(
                _expand_dirs(d2, self.val.ndim, len(out_shape)), (k,) + out_shape
            )
        return d1, d2

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Dual2):
            rs = np.broadcast_shapes(self.val.shape, other.val.shape)
            a1, a2 = self._dirs_for(rs)
            b1, b2 = other._dirs_for(rs)
            d2 = None if (a2 is None or b2 is None) else a2 + b2
            return Dual2(self.val + other.val, a1 + b1, d2)
        c = _val(other)
        rs = np.broadcast_shapes(self.val.shape, c.shape)
        a1, a2 = self._dirs_for(rs)
        return Dual2(self.val + c, a1.copy(), None if a2 is None else a2.copy())

    __radd__ = __add__

    def __neg__(self):
        return Dual2(-self.val, -self.d1, None if self.d2 is None else -self.d2)

    def __sub__(self, other):
        if isinstance(other, Dual2):
            return self + (-other)
        return self + (-_val(other))

    def __rsub__(self, other):
        return (-self) + _val(other)

    def __mul__(self, other):
        if isinstance(other, Dual2):
            rs = np.broadcast_shapes(self.val.shape, other.val.shape)
            a1, a2 = self._dirs_for(rs)
            b1, b2 = other._dirs_for(rs)
            d2 = None
            if a2 is not None and b2 is not None:
                d2 = a2 * other.val + 2.0 * a1 * b1 + self.val * b2
            return Dual2(self.val * other.val, a1 * other.val + self.val * b1, d2)
        c = _val(other)
        rs = np.broadcast_shapes(self.val.shape, c.shape)
        a1, a2 = self._dirs_for(rs)
        return Dual2(self.val * c, a1 * c, None if a2 is None else a2 * c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual2):
            return self * op_reciprocal(other)
        return self * np.reciprocal(_val(other))

    def __rtruediv__(self, other):
        return op_reciprocal(self) * _val(other)

    def __matmul__(self, other):
        if isinstance(other, Dual2):
            raise TypeError("matmul requires a constant operand on one side")
        c = _val(other)
        return Dual2(self.val @ c, self.d1 @ c, None if self.d2 is None else self.d2 @ c)

    def __rmatmul__(self, other):
        c = _val(other)
        return Dual2(c @ self.val, c @ self.d1, None if self.d2 is None else c @ self.d2)

    def __pow__(self, n):
        return op_powi(self, int(n))

    def __getitem__(self, key):
        key = key if isinstance(key, tuple) else (key,)
        dkey = (slice(None),) + key
        d2 = None if self.d2 is None else self.d2[dkey]
        return Dual2(self.val[key], self.d1[dkey], d2)


def seed(x, directions, second=True):
    """Dual2 for input x with the given seed directions.

    x has shape S and directions (k, S') where each direction broadcasts
    against S (typically S = (n, d) and directions = (k, d) unit vectors).
    """
    x = np.asarray(x, dtype=np.float64)
    directions = np.asarray(directions, dtype=np.float64)
    if directions.ndim == 1:
        directions = directions[:, None] if x.ndim else directions
    k = directions.shape[0]
    d1 = np.empty((k,) + x.shape)
    for j in range(k):
        d1[j] = np.broadcast_to(directions[j], x.shape)
    d2 = np.zeros_like(d1) if second else None
    return Dual2(x, d1, d2)


def _chain(x, f0, f1, f2):
    v = x.val
    fp = f1(v)
    d1 = fp * x.d1
    d2 = None
    if x.d2 is not None:
        d2 = f2(v) * x.d1 * x.d1 + fp * x.d2
    return Dual2(f0(v), d1, d2)


def op_swish(x):
    return _chain(x, ops.swish_value, ops.swish_d1, ops.swish_d2)


def op_sin(x):
    return _chain(x, np.sin, np.cos, lambda v: -np.sin(v))


def op_cos(x):
    return _chain(x, np.cos, lambda v: -np.sin(v), lambda v: -np.cos(v))


def op_exp(x):
    return _chain(x, np.exp, np.exp, np.exp)


def op_reciprocal(x):
    return _chain(x, np.reciprocal, lambda v: -(v ** (-2)), lambda v: 2.0 * v ** (-3))


def op_powi(x, n):
    if n == 0:
        return _chain(
            x, np.ones_like, lambda v: np.zeros_like(v), lambda v: np.zeros_like(v)
        )
    return _chain(
        x,
        lambda v: v**n,
        lambda v: n * v ** (n - 1),
        lambda v: n * (n - 1) * v ** (n - 2),
    )


def op_sum(x, axis=None, keepdims=False):
    if axis is None:
        ax_val = tuple(range(x.val.ndim))
    else:
        ax_val = axis if isinstance(axis, tuple) else (axis,)
        ax_val = tuple(a % x.val.ndim for a in ax_val)
    ax_dir = tuple(a + 1 for a in ax_val)
    d2 = None if x.d2 is None else np.sum(x.d2, axis=ax_dir, keepdims=keepdims)
    return Dual2(
        np.sum(x.val, axis=ax_val, keepdims=keepdims),
        np.sum(x.d1, axis=ax_dir, keepdims=keepdims),
        d2,
    )


def op_reshape(x, shape):
    shape = tuple(shape)
    dshape = (x.d1.shape[0],) + shape
    d2 = None if x.d2 is None else x.d2.reshape(dshape)
    return Dual2(x.val.reshape(shape), x.d1.reshape(dshape), d2)


def op_slice_last(x, j0, j1):
    d2 = None if x.d2 is None else x.d2[..., j0:j1]
    return Dual2(x.val[..., j0:j1], x.d1[..., j0:j1], d2)


def op_repeat_rows(x, k):
    d2 = None if x.d2 is None else np.repeat(x.d2, k, axis=1)
    return Dual2(np.repeat(x.val, k, axis=0), np.repeat(x.d1, k, axis=1), d2)
