"""Differentiation machinery: reverse-mode tape, forward-mode duals."""

import numpy as np

from . import ops
from .dual import Dual2, seed
from .tape import Tape, Var


def grad(f, params):
    """Gradient of the scalar-valued f with respect to the flat vector params.

    f is evaluated once on a tape Var; a reverse sweep over the recorded
    nodes yields the gradient.  A constant f (no Var in its output) has a
    zero gradient.
    """
    params = np.asarray(params, dtype=np.float64)
    tape = Tape()
    p = tape.leaf(params)
    out = f(p)
    if not isinstance(out, Var):
        return np.zeros_like(params)
    tape.backward(out)
    return p.grad.copy()


def jvp2(f, x, directions):
    """Evaluate f with value, first and second directional derivatives.

    directions is (k, dim) (or k scalars for scalar input); the result is a
    Dual2 whose d1[j]/d2[j] are the first/second derivatives along
    direction j (pure directions, no cross terms).
    """
    return f(seed(x, directions, second=True))


def jac_latent(net_eval, phi, x_batch):
    """Batch Jacobian of the network output with respect to the latent state.

    net_eval(phi, x_batch) must be written against the ops primitives; it is
    evaluated once with q first-order seed directions.  Returns an array of
    shape (*output_shape, q) — for a scalar field on n points, (n, q).
    """
    phi = np.asarray(phi, dtype=np.float64)
    q = phi.shape[0]
    out = net_eval(seed(phi, np.eye(q), second=False), x_batch)
    if not isinstance(out, Dual2):
        val = ops.value_of(out)
        return np.zeros(val.shape + (q,))
    return np.moveaxis(out.d1, 0, -1).copy()
