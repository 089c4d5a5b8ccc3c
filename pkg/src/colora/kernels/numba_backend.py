"""Numba @njit implementations of the hot kernels.

Semantics match colora.kernels.numpy_backend; parity is pinned by
tests/test_kernels.py.  All kernels are serial so results do not depend on
the thread pool.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _wrap(i, n):
    if i >= n:
        return i - n
    if i < 0:
        return i + n
    return i


@njit(cache=True)
def diff1_periodic_1d(u, dx):
    n = u.shape[0]
    out = np.empty_like(u)
    c = 1.0 / (12.0 * dx)
    for i in range(n):
        ip1 = _wrap(i + 1, n)
        ip2 = _wrap(i + 2, n)
        im1 = _wrap(i - 1, n)
        im2 = _wrap(i - 2, n)
        out[i] = (-u[ip2] + 8.0 * u[ip1] - 8.0 * u[im1] + u[im2]) * c
    return out


@njit(cache=True)
def diff2_periodic_1d(u, dx):
    n = u.shape[0]
    out = np.empty_like(u)
    c = 1.0 / (12.0 * dx * dx)
    for i in range(n):
        ip1 = _wrap(i + 1, n)
        ip2 = _wrap(i + 2, n)
        im1 = _wrap(i - 1, n)
        im2 = _wrap(i - 2, n)
        out[i] = (-u[ip2] + 16.0 * u[ip1] - 30.0 * u[i] + 16.0 * u[im1] - u[im2]) * c
    return out


@njit(cache=True)
def diff1_periodic_2d(u, axis, dx):
    n0, n1 = u.shape
    out = np.empty_like(u)
    c = 1.0 / (12.0 * dx)
    if axis == 0:
        for i in range(n0):
            ip1 = _wrap(i + 1, n0)
            ip2 = _wrap(i + 2, n0)
            im1 = _wrap(i - 1, n0)
            im2 = _wrap(i - 2, n0)
            for j in range(n1):
                out[i, j] = (-u[ip2, j] + 8.0 * u[ip1, j] - 8.0 * u[im1, j] + u[im2, j]) * c
    else:
        for i in range(n0):
            for j in range(n1):
                jp1 = _wrap(j + 1, n1)
                jp2 = _wrap(j + 2, n1)
                jm1 = _wrap(j - 1, n1)
                jm2 = _wrap(j - 2, n1)
                out[i, j] = (-u[i, jp2] + 8.0 * u[i, jp1] - 8.0 * u[i, jm1] + u[i, jm2]) * c
    return out


@njit(cache=True)
def diff2_periodic_2d(u, axis, dx):
    n0, n1 = u.shape
    out = np.empty_like(u)
    c = 1.0 / (12.0 * dx * dx)
    if axis == 0:
        for i in range(n0):
            ip1 = _wrap(i + 1, n0)
            ip2 = _wrap(i + 2, n0)
            im1 = _wrap(i - 1, n0)
            im2 = _wrap(i - 2, n0)
            for j in range(n1):
                out[i, j] = (
                    -u[ip2, j] + 16.0 * u[ip1, j] - 30.0 * u[i, j] + 16.0 * u[im1, j] - u[im2, j]
                ) * c
    else:
        for i in range(n0):
            for j in range(n1):
                jp1 = _wrap(j + 1, n1)
                jp2 = _wrap(j + 2, n1)
                jm1 = _wrap(j - 1, n1)
                jm2 = _wrap(j - 2, n1)
                out[i, j] = (
                    -u[i, jp2] + 16.0 * u[i, jp1] - 30.0 * u[i, j] + 16.0 * u[i, jm1] - u[i, jm2]
                ) * c
    return out


def diff1_periodic(u, axis, dx):
    if u.ndim == 1:
        return diff1_periodic_1d(u, dx)
    return diff1_periodic_2d(u, axis, dx)


def diff2_periodic(u, axis, dx):
    if u.ndim == 1:
        return diff2_periodic_1d(u, dx)
    return diff2_periodic_2d(u, axis, dx)


@njit(cache=True)
def adam_update(p, g, m, v, step, lr, beta1, beta2, eps):
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    for i in range(p.shape[0]):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        p[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)


@njit(cache=True)
def jacobi_orthogonalize(A, V, tol, max_sweeps):
    m, n = A.shape
    nv = V.shape[0]
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                gpp = 0.0
                gqq = 0.0
                gpq = 0.0
                for i in range(m):
                    gpp += A[i, p] * A[i, p]
                    gqq += A[i, q] * A[i, q]
                    gpq += A[i, p] * A[i, q]
                if abs(gpq) <= tol * np.sqrt(gpp * gqq) or gpq == 0.0:
                    continue
                rotated = True
                tau = (gqq - gpp) / (2.0 * gpq)
                if tau == 0.0:
                    t = 1.0
                else:
                    t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = cs * t
                for i in range(m):
                    ap = A[i, p]
                    aq = A[i, q]
                    A[i, p] = cs * ap - sn * aq
                    A[i, q] = sn * ap + cs * aq
                for i in range(nv):
                    vp = V[i, p]
                    vq = V[i, q]
                    V[i, p] = cs * vp - sn * vq
                    V[i, q] = sn * vp + cs * vq
        if not rotated:
            break
    return sweeps


@njit(cache=True)
def jacobi_sym_eig(G, V, tol, max_sweeps):
    n = G.shape[0]
    tiny = 2.2250738585072014e-308
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                gpq = G[p, q]
                scale = np.sqrt(abs(G[p, p] * G[q, q])) + tiny
                if abs(gpq) <= tol * scale or gpq == 0.0:
                    continue
                rotated = True
                tau = (G[q, q] - G[p, p]) / (2.0 * gpq)
                if tau == 0.0:
                    t = 1.0
                else:
                    t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = cs * t
                for i in range(n):
                    gp = G[i, p]
                    gq = G[i, q]
                    G[i, p] = cs * gp - sn * gq
                    G[i, q] = sn * gp + cs * gq
                for j in range(n):
                    gp = G[p, j]
                    gq = G[q, j]
                    G[p, j] = cs * gp - sn * gq
                    G[q, j] = sn * gp + cs * gq
                for i in range(n):
                    vp = V[i, p]
                    vq = V[i, q]
                    V[i, p] = cs * vp - sn * vq
                    V[i, q] = sn * vp + cs * vq
        if not rotated:
            break
    return sweeps
