"""Pure-numpy implementations of the hot kernels.

Reference semantics for the numba backend; selected via COLORA_BACKEND=numpy.
"""

import numpy as np


# ---------------------------------------------------------------------------
# 4th-order central difference stencils on periodic grids.

def diff1_periodic(u, axis, dx):
    """First derivative, 4th-order central, periodic wrap."""
    r2 = np.roll(u, -2, axis=axis)
    r1 = np.roll(u, -1, axis=axis)
    l1 = np.roll(u, 1, axis=axis)
    l2 = np.roll(u, 2, axis=axis)
    return (-r2 + 8.0 * r1 - 8.0 * l1 + l2) * (1.0 / (12.0 * dx))


def diff2_periodic(u, axis, dx):
    """Second derivative, 4th-order central, periodic wrap."""
    r2 = np.roll(u, -2, axis=axis)
    r1 = np.roll(u, -1, axis=axis)
    l1 = np.roll(u, 1, axis=axis)
    l2 = np.roll(u, 2, axis=axis)
    return (-r2 + 16.0 * r1 - 30.0 * u + 16.0 * l1 - l2) * (1.0 / (12.0 * dx * dx))


# ---------------------------------------------------------------------------
# Adam update, applied in place to the flat parameter vector.

def adam_update(p, g, m, v, step, lr, beta1, beta2, eps):
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1**step)
    vhat = v / (1.0 - beta2**step)
    p -= lr * mhat / (np.sqrt(vhat) + eps)


# ---------------------------------------------------------------------------
# One-sided (Hestenes) Jacobi sweeps: orthogonalize the columns of A in
# place, accumulating the right rotations into V.  Returns the number of
# sweeps performed; convergence when every column pair satisfies
# |a_p . a_q| <= tol * |a_p| |a_q| within one full sweep.

def jacobi_orthogonalize(A, V, tol, max_sweeps):
    n = A.shape[1]
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                ap = A[:, p]
                aq = A[:, q]
                gpp = ap @ ap
                gqq = aq @ aq
                gpq = ap @ aq
                if abs(gpq) <= tol * np.sqrt(gpp * gqq) or gpq == 0.0:
                    continue
                rotated = True
                tau = (gqq - gpp) / (2.0 * gpq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                if tau == 0.0:
                    t = 1.0
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = cs * t
                new_p = cs * ap - sn * aq
                new_q = sn * ap + cs * aq
                A[:, p] = new_p
                A[:, q] = new_q
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = cs * vp - sn * vq
                V[:, q] = sn * vp + cs * vq
        if not rotated:
            break
    return sweeps


# ---------------------------------------------------------------------------
# Cyclic Jacobi eigenvalue iteration for a symmetric matrix (in place).
# Eigenvectors accumulate into V.  Returns the sweep count.

def jacobi_sym_eig(G, V, tol, max_sweeps):
    n = G.shape[0]
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                gpq = G[p, q]
                scale = np.sqrt(abs(G[p, p] * G[q, q])) + np.finfo(float).tiny
                if abs(gpq) <= tol * scale or gpq == 0.0:
                    continue
                rotated = True
                tau = (G[q, q] - G[p, p]) / (2.0 * gpq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                if tau == 0.0:
                    t = 1.0
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = cs * t
                gp = G[:, p].copy()
                gq = G[:, q].copy()
                G[:, p] = cs * gp - sn * gq
                G[:, q] = sn * gp + cs * gq
                gp = G[p, :].copy()
                gq = G[q, :].copy()
                G[p, :] = cs * gp - sn * gq
                G[q, :] = sn * gp + cs * gq
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = cs * vp - sn * vq
                V[:, q] = sn * vp + cs * vq
        if not rotated:
            break
    return sweeps
