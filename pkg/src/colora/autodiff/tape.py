"""Reverse-mode differentiation over a replayable operation tape.

Values on the tape are float64 ndarrays.  A Var is a handle into its tape;
arithmetic between Vars and plain arrays records a node holding the forward
value, the operand indices and a vector-Jacobian closure.  The backward
sweep walks the node list once in reverse, accumulating gradients in a
fixed order so results are bit-reproducible.
"""

import numpy as np

from . import ops


class Var:
    __slots__ = ("tape", "idx")
    __array_ufunc__ = None  # keep numpy from silently swallowing Vars

    def __init__(self, tape, idx):
        self.tape = tape
        self.idx = idx

    @property
    def value(self):
        return self.tape.values[self.idx]

    @property
    def shape(self):
        return self.value.shape

    @property
    def grad(self):
        g = self.tape.grads[self.idx]
        if g is None:
            return np.zeros_like(self.value)
        return g

    def __add__(self, other):
        return op_add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return op_neg(self)

    def __sub__(self, other):
        return op_add(self, op_neg(_lift(self.tape, other)))

    def __rsub__(self, other):
        return op_add(_lift(self.tape, other), op_neg(self))

    def __mul__(self, other):
        return op_mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return op_mul(self, op_reciprocal(_lift(self.tape, other)))

    def __rtruediv__(self, other):
        return op_mul(_lift(self.tape, other), op_reciprocal(self))

    def __matmul__(self, other):
        return op_matmul(self, other)

    def __rmatmul__(self, other):
        return op_matmul(other, self, tape=self.tape)

    def __pow__(self, n):
        return op_powi(self, int(n))

    def __repr__(self):
        return f"Var(idx={self.idx}, shape={self.value.shape})"


class Tape:
    def __init__(self):
        self.values = []
        self.parents = []
        self.vjps = []
        self.grads = []

    def reset(self):
        self.values.clear()
        self.parents.clear()
        self.vjps.clear()
        self.grads.clear()

    def _push(self, value, parents=(), vjp=None):
        self.values.append(np.asarray(value, dtype=np.float64))
        self.parents.append(parents)
        self.vjps.append(vjp)
        self.grads.append(None)
        return Var(self, len(self.values) - 1)

    def leaf(self, value):
        return self._push(value)

    def backward(self, out):
        """Accumulate d(out)/d(node) for every node; out must be scalar."""
        if out.tape is not self:
            raise ValueError("output Var belongs to a different tape")
        if np.size(self.values[out.idx]) != 1:
            raise ValueError("backward requires a scalar output")
        self.grads = [None] * len(self.values)
        self.grads[out.idx] = np.ones_like(self.values[out.idx])
        for i in range(out.idx, -1, -1):
            g = self.grads[i]
            if g is None or self.vjps[i] is None:
                continue
            for pidx, pgrad in zip(self.parents[i], self.vjps[i](g)):
                if pgrad is None:
                    continue
                if self.grads[pidx] is None:
                    self.grads[pidx] = pgrad
                else:
                    self.grads[pidx] = self.grads[pidx] + pgrad


def _lift(tape, x):
    if isinstance(x, Var):
        if x.tape is not tape:
            raise ValueError("cannot mix Vars from different tapes")
        return x
    if isinstance(x, _Const):
        return x
    return _Const(np.asarray(x, dtype=np.float64))


class _Const:
    """Constant operand: participates in forward values, receives no grad."""

    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value


def _find_tape(*xs):
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise TypeError("expected at least one Var operand")


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _binary(a, b, forward, vjp_a, vjp_b):
    tape = _find_tape(a, b)
    a = _lift(tape, a)
    b = _lift(tape, b)
    av, bv = a.value, b.value
    parents = []
    slots = []
    if isinstance(a, Var):
        parents.append(a.idx)
        slots.append(0)
    if isinstance(b, Var):
        parents.append(b.idx)
        slots.append(1)

    def vjp(g, av=av, bv=bv, slots=tuple(slots)):
        out = []
        for s in slots:
            out.append(vjp_a(g, av, bv) if s == 0 else vjp_b(g, av, bv))
        return out

    return tape._push(forward(av, bv), tuple(parents), vjp)


def op_add(a, b):
    return _binary(
        a,
        b,
        lambda av, bv: av + bv,
        lambda g, av, bv: _unbroadcast(g, av.shape),
        lambda g, av, bv: _unbroadcast(g, bv.shape),
    )


def op_mul(a, b):
    return _binary(
        a,
        b,
        lambda av, bv: av * bv,
        lambda g, av, bv: _unbroadcast(g * bv, av.shape),
        lambda g, av, bv: _unbroadcast(g * av, bv.shape),
    )


def op_matmul(a, b, tape=None):
    tape = tape or _find_tape(a, b)
    a = _lift(tape, a)
    b = _lift(tape, b)
    av, bv = a.value, b.value
    if av.ndim < 2 or bv.ndim < 2:
        raise TypeError("matmul operands must be at least 2-D")

    def vjp_a(g, av, bv):
        ga = g @ np.swapaxes(bv, -1, -2)
        return _unbroadcast(ga, av.shape)

    def vjp_b(g, av, bv):
        gb = np.swapaxes(av, -1, -2) @ g
        return _unbroadcast(gb, bv.shape)

    return _binary(a, b, lambda av, bv: av @ bv, vjp_a, vjp_b)


def op_neg(a):
    if isinstance(a, _Const):
        return _Const(-a.value)
    return a.tape._push(-a.value, (a.idx,), lambda g: [-g])


def _chain_unary(a, value, deriv):
    return a.tape._push(value, (a.idx,), lambda g, d=deriv: [g * d])


def op_swish(a):
    x = a.value
    return _chain_unary(a, ops.swish_value(x), ops.swish_d1(x))


def op_sin(a):
    x = a.value
    return _chain_unary(a, np.sin(x), np.cos(x))


def op_cos(a):
    x = a.value
    return _chain_unary(a, np.cos(x), -np.sin(x))


def op_exp(a):
    v = np.exp(a.value)
    return _chain_unary(a, v, v)


def op_reciprocal(a):
    if isinstance(a, _Const):
        return _Const(np.reciprocal(a.value))
    v = np.reciprocal(a.value)
    return _chain_unary(a, v, -v * v)


def op_powi(a, n):
    x = a.value
    if n == 0:
        return _chain_unary(a, np.ones_like(x), np.zeros_like(x))
    return _chain_unary(a, x**n, n * x ** (n - 1))


def op_sum(a, axis=None, keepdims=False):
    x = a.value

    def vjp(g):
        if axis is None:
            return [np.broadcast_to(g, x.shape)]
        gg = g if keepdims else np.expand_dims(g, axis)
        return [np.broadcast_to(gg, x.shape)]

    return a.tape._push(np.sum(x, axis=axis, keepdims=keepdims), (a.idx,), vjp)


def op_reshape(a, shape):
    x = a.value
    return a.tape._push(np.reshape(x, shape), (a.idx,), lambda g: [g.reshape(x.shape)])


def op_slice_last(a, j0, j1):
    x = a.value

    def vjp(g):
        full = np.zeros_like(x)
        full[..., j0:j1] = g
        return [full]

    return a.tape._push(x[..., j0:j1], (a.idx,), vjp)


def op_repeat_rows(a, k):
    x = a.value

    def vjp(g):
        return [g.reshape((x.shape[0], k) + x.shape[1:]).sum(axis=1)]

    return a.tape._push(np.repeat(x, k, axis=0), (a.idx,), vjp)
