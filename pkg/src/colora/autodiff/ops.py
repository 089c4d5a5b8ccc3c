"""Primitive operations shared by every differentiation mode.

The closed primitive set is: affine maps (add/mul/matmul), swish, sin, cos,
exp, integer powers, reciprocal, sum reductions, plus the structural ops
reshape / slice_last / repeat_rows.  Network forward passes are written
against these functions only, so the same code runs on plain float64
arrays, on tape variables (reverse mode) and on Dual2 numbers (forward
mode).  Anything outside the set fails loudly at graph-build time.
"""

import numpy as np


def sigmoid(x):
    # tanh form is stable for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def swish_value(x):
    return x * sigmoid(x)


def swish_d1(x):
    s = sigmoid(x)
    return s * (1.0 + x * (1.0 - s))


def swish_d2(x):
    s = sigmoid(x)
    sp = s * (1.0 - s)
    return 2.0 * sp + x * sp * (1.0 - 2.0 * s)


def _is_var(x):
    from .tape import Var

    return isinstance(x, Var)


def _is_dual(x):
    from .dual import Dual2

    return isinstance(x, Dual2)


def _unary(x, tape_fn, dual_fn, np_fn):
    if _is_var(x):
        return tape_fn(x)
    if _is_dual(x):
        return dual_fn(x)
    return np_fn(np.asarray(x, dtype=np.float64))


def swish(x):
    from . import dual, tape

    return _unary(x, tape.op_swish, dual.op_swish, swish_value)


def sin(x):
    from . import dual, tape

    return _unary(x, tape.op_sin, dual.op_sin, np.sin)


def cos(x):
    from . import dual, tape

    return _unary(x, tape.op_cos, dual.op_cos, np.cos)


def exp(x):
    from . import dual, tape

    return _unary(x, tape.op_exp, dual.op_exp, np.exp)


def reciprocal(x):
    from . import dual, tape

    return _unary(x, tape.op_reciprocal, dual.op_reciprocal, np.reciprocal)


def powi(x, n):
    from . import dual, tape

    n = int(n)
    if _is_var(x):
        return tape.op_powi(x, n)
    if _is_dual(x):
        return dual.op_powi(x, n)
    return np.asarray(x, dtype=np.float64) ** n


def sum(x, axis=None, keepdims=False):  # noqa: A001 - mirrors np.sum
    from . import dual, tape

    if _is_var(x):
        return tape.op_sum(x, axis, keepdims)
    if _is_dual(x):
        return dual.op_sum(x, axis, keepdims)
    return np.sum(x, axis=axis, keepdims=keepdims)


def reshape(x, shape):
    from . import dual, tape

    if _is_var(x):
        return tape.op_reshape(x, shape)
    if _is_dual(x):
        return dual.op_reshape(x, shape)
    return np.reshape(x, shape)


def slice_last(x, j0, j1):
    from . import dual, tape

    if _is_var(x):
        return tape.op_slice_last(x, j0, j1)
    if _is_dual(x):
        return dual.op_slice_last(x, j0, j1)
    return x[..., j0:j1]


def repeat_rows(x, k):
    """Repeat each leading-axis row k times (row i -> rows i*k .. i*k+k-1)."""
    from . import dual, tape

    if _is_var(x):
        return tape.op_repeat_rows(x, k)
    if _is_dual(x):
        return dual.op_repeat_rows(x, k)
    return np.repeat(x, k, axis=0)


def value_of(x):
    """Plain ndarray value of a Var / Dual2 / array-like."""
    if _is_var(x) or _is_dual(x):
        return x.value if _is_var(x) else x.val
    return np.asarray(x, dtype=np.float64)
