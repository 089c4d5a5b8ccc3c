"""Time integrators: fixed RK4, adaptive Dormand-Prince 5(4), and implicit
Euler with damped Newton iterations.

All three work on a flat state vector and a callable f(t, y).  The implicit
scheme assembles its Jacobian by finite differences of f — densely for tiny
systems, otherwise by a distance-5 coloring of the periodic stencil graph so
one perturbed evaluation fills many sparse columns at once.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import IntegrationError

DT_UNDERFLOW = 1e-12

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


def _check_finite(y, t):
    if not np.all(np.isfinite(y)):
        raise IntegrationError(f"non-finite state at t={t:.6g}")


def rk4_solve(f, y0, t_out, dt):
    """Classical RK4 with fixed step size, stepping exactly onto t_out."""
    t_out = np.asarray(t_out, dtype=np.float64)
    y = np.asarray(y0, dtype=np.float64).copy()
    out = np.empty((t_out.size,) + y.shape)
    out[0] = y
    for k in range(t_out.size - 1):
        span = t_out[k + 1] - t_out[k]
        nsub = max(1, int(np.ceil(span / dt - 1e-12)))
        h = span / nsub
        t = t_out[k]
        for _ in range(nsub):
            k1 = f(t, y)
            k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = f(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
        _check_finite(y, t)
        out[k + 1] = y
    return out


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(f, t0, y0, f0, rtol, atol, t_span):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if (d1 < 1e-10 or d0 < 1e-10) else 0.01 * d0 / d1
    h0 = min(h0, 0.1 * t_span) if t_span > 0 else h0
    y1 = y0 + h0 * f0
    f1 = f(t0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    dm = max(d1, d2)
    h1 = (0.01 / dm) ** 0.2 if dm > 1e-15 else max(1e-6, h0 * 1e-3)
    return max(DT_UNDERFLOW * 10, min(100 * h0, h1, t_span if t_span > 0 else h1))


def dopri5_solve(f, y0, t_out, rtol=1e-6, atol=1e-6, step_observer=None, project=None):
    """Adaptive Dormand-Prince 5(4) with cubic-Hermite dense output.

    Returns states at t_out (first entry must equal the initial time).  The
    optional step_observer(t_new, y_new) is called after every accepted
    step, in order.  project(t_new, y_new) -> y may adjust each accepted
    state (e.g. an invariant-preserving projection); the right-hand side is
    then re-evaluated at the projected state.
    """
    t_out = np.asarray(t_out, dtype=np.float64)
    y = np.asarray(y0, dtype=np.float64).copy()
    t = float(t_out[0])
    t_end = float(t_out[-1])
    out = np.empty((t_out.size,) + y.shape)
    out[0] = y
    next_out = 1
    if t_out.size == 1:
        return out

    fcur = f(t, y)
    h = _initial_step(f, t, y, fcur, rtol, atol, t_end - t)
    k = np.empty((7,) + y.shape)
    eps_end = 1e-14 * max(1.0, abs(t_end))
    while t_end - t > eps_end:
        h = min(h, t_end - t)
        if h < DT_UNDERFLOW:
            raise IntegrationError(f"step size underflow at t={t:.6g}")
        k[0] = fcur
        for i in range(1, 7):
            acc = k[0] * _DP_A[i][0]
            for j in range(1, i):
                acc = acc + k[j] * _DP_A[i][j]
            k[i] = f(t + _DP_C[i] * h, y + h * acc)
        y_new = y + h * (_DP_B @ k)
        err = h * (_DP_E @ k)
        enorm = _error_norm(err, y, y_new, rtol, atol)
        if enorm <= 1.0:
            t_new = t + h
            if project is not None:
                y_new = project(t_new, y_new)
                f_new = f(t_new, y_new)
            else:
                f_new = k[6]  # FSAL: stage 7 evaluated at (t+h, y_new)
            while next_out < t_out.size and t_out[next_out] <= t_new + 1e-14 * max(1.0, abs(t_new)):
                to = t_out[next_out]
                if abs(to - t_new) <= 1e-14 * max(1.0, abs(t_new)):
                    out[next_out] = y_new
                else:
                    theta = (to - t) / h
                    out[next_out] = _hermite(theta, h, y, y_new, fcur, f_new)
                next_out += 1
            _check_finite(y_new, t_new)
            if step_observer is not None:
                step_observer(t_new, y_new)
            t, y, fcur = t_new, y_new, f_new
            h = h * min(5.0, max(0.2, 0.9 * enorm ** (-0.2))) if enorm > 0 else h * 5.0
        else:
            h = h * min(1.0, max(0.2, 0.9 * enorm ** (-0.2)))
    while next_out < t_out.size:  # t_end reached within round-off
        out[next_out] = y
        next_out += 1
    return out


def _hermite(theta, h, y0, y1, f0, f1):
    return (1 - theta) * y0 + theta * y1 + theta * (theta - 1) * (
        (1 - 2 * theta) * (y1 - y0) + (theta - 1) * h * f0 + theta * h * f1
    )


# ---------------------------------------------------------------------------
# implicit Euler with Newton iterations


def _axis_colors(n, radius=2):
    """Distance-(2*radius+1) coloring of the cycle C_n.

    Stride classes i mod 5 cover the first 5*floor(n/5) points; each
    leftover point gets its own color so that no two same-color points can
    meet inside one stencil support, including across the periodic wrap.
    """
    stride = 2 * radius + 1
    base = stride * (n // stride)
    colors = np.empty(n, dtype=np.int64)
    colors[:base] = np.arange(base) % stride
    for j, i in enumerate(range(base, n)):
        colors[i] = stride + j
    return colors, stride + (n - base)


class StencilColoring:
    """Curtis-Powell-Reid coloring for fields on a periodic grid whose
    stencil couples, per row: every field at the center point plus the same
    axis-aligned arms of radius 2 for every field."""

    def __init__(self, shape, n_fields, radius=2):
        self.shape = tuple(shape)
        self.n_fields = n_fields
        self.radius = radius
        npts = int(np.prod(self.shape))
        self.ndof = n_fields * npts
        axis_colors = []
        axis_counts = []
        for n in self.shape:
            c, m = _axis_colors(n, radius)
            axis_colors.append(c)
            axis_counts.append(m)

        mesh = np.meshgrid(*axis_colors, indexing="ij")
        combined = np.zeros(self.shape, dtype=np.int64)
        for c, m in zip(mesh, axis_counts):
            combined = combined * m + c
        ncolors_space = int(np.prod(axis_counts))
        point_color = combined.ravel()

        # rows affected by a perturbed column: same point and the arm
        # points, for every output field
        offsets = [np.zeros(len(self.shape), dtype=np.int64)]
        for ax in range(len(self.shape)):
            for off in range(1, radius + 1):
                for s in (-1, 1):
                    o = np.zeros(len(self.shape), dtype=np.int64)
                    o[ax] = s * off
                    offsets.append(o)
        idx = np.indices(self.shape).reshape(len(self.shape), -1)
        neigh = []
        for o in offsets:
            shifted = (idx + o[:, None]) % np.asarray(self.shape)[:, None]
            neigh.append(np.ravel_multi_index(shifted, self.shape))
        self._neigh = np.stack(neigh, axis=1)  # (npts, n_offsets)

        self.colors = []
        for fld in range(n_fields):
            for c in range(ncolors_space):
                pts = np.nonzero(point_color == c)[0]
                if pts.size == 0:
                    continue
                cols = fld * npts + pts
                rows = []
                colrep = []
                for f_out in range(n_fields):
                    r = f_out * npts + self._neigh[pts]  # (len(pts), n_off)
                    rows.append(r.ravel())
                    colrep.append(np.repeat(cols, self._neigh.shape[1]))
                self.colors.append(
                    (cols, np.concatenate(rows), np.concatenate(colrep))
                )

    def jacobian(self, f, t, y, f0):
        """Sparse finite-difference Jacobian of f(t, .) at y."""
        data = []
        rows_all = []
        cols_all = []
        eps_base = np.sqrt(np.finfo(np.float64).eps)
        for cols, rows, colrep in self.colors:
            eps = eps_base * (1.0 + np.abs(y[cols]))
            yp = y.copy()
            yp[cols] += eps
            df = f(t, yp) - f0
            epsmap = np.empty(self.ndof)
            epsmap[cols] = eps
            data.append(df[rows] / epsmap[colrep])
            rows_all.append(rows)
            cols_all.append(colrep)
        J = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows_all), np.concatenate(cols_all))),
            shape=(self.ndof, self.ndof),
        )
        return J.tocsc()


def _dense_fd_jacobian(f, t, y, f0):
    n = y.size
    J = np.empty((n, n))
    eps_base = np.sqrt(np.finfo(np.float64).eps)
    for j in range(n):
        eps = eps_base * (1.0 + abs(y[j]))
        yp = y.copy()
        yp[j] += eps
        J[:, j] = (f(t, yp) - f0) / eps
    return J


class _NewtonSolver:
    def __init__(self, f, coloring=None, dense_limit=512):
        self.f = f
        self.coloring = coloring
        self.dense_limit = dense_limit
        self._lu = None
        self._dt = None

    def refresh(self, t, y, dt):
        f0 = self.f(t, y)
        if self.coloring is not None and y.size > self.dense_limit:
            Jf = self.coloring.jacobian(self.f, t, y, f0)
            M = sp.eye(y.size, format="csc") - dt * Jf
            self._lu = spla.splu(M)
            self._solve = self._lu.solve
        else:
            Jf = _dense_fd_jacobian(self.f, t, y, f0)
            M = np.eye(y.size) - dt * Jf
            lu = np.linalg.inv(M)  # tiny systems only
            self._solve = lambda r: lu @ r
        self._dt = dt

    def solve(self, r):
        return self._solve(r)


def implicit_euler_solve(
    f,
    y0,
    t_out,
    dt,
    newton_tol=1e-12,
    max_newton=25,
    coloring=None,
    refresh="auto",
):
    """Backward Euler with damped Newton; steps exactly onto t_out.

    refresh: "auto" re-factors the iteration matrix only when Newton slows
    down (more than 5 iterations or a damped step), an int re-factors every
    that many steps, and 1 re-factors every step.
    """
    t_out = np.asarray(t_out, dtype=np.float64)
    y = np.asarray(y0, dtype=np.float64).copy()
    out = np.empty((t_out.size,) + y.shape)
    out[0] = y
    solver = _NewtonSolver(f, coloring)
    steps_since_refresh = 10**9
    for k in range(t_out.size - 1):
        span = t_out[k + 1] - t_out[k]
        nsub = max(1, int(np.ceil(span / dt - 1e-12)))
        h = span / nsub
        t = t_out[k]
        for _ in range(nsub):
            t_new = t + h
            need = (
                solver._dt != h
                or steps_since_refresh >= (refresh if isinstance(refresh, int) else 10**9)
            )
            if need:
                solver.refresh(t_new, y, h)
                steps_since_refresh = 0
            z = y.copy()
            converged = False
            refreshed_in_step = need
            it = 0
            res = np.inf
            while it < max_newton:
                it += 1
                G = z - y - h * f(t_new, z)
                res = float(np.max(np.abs(G)))
                if res < newton_tol:
                    converged = True
                    break
                delta = -solver.solve(G)
                # damping: halve the step while the residual increases
                s = 1.0
                zt = z + delta
                rt = float(np.max(np.abs(zt - y - h * f(t_new, zt))))
                while rt > res and s > 1.0 / 16.0:
                    s *= 0.5
                    zt = z + s * delta
                    rt = float(np.max(np.abs(zt - y - h * f(t_new, zt))))
                z = zt
                if (s < 1.0 or it > 5) and not refreshed_in_step:
                    solver.refresh(t_new, z, h)
                    steps_since_refresh = 0
                    refreshed_in_step = True
            if not converged:
                # one retry with a fresh factorization at the iterate
                solver.refresh(t_new, z, h)
                steps_since_refresh = 0
                for it2 in range(max_newton):
                    G = z - y - h * f(t_new, z)
                    res = float(np.max(np.abs(G)))
                    if res < newton_tol:
                        converged = True
                        break
                    z = z - solver.solve(G)
            if not converged:
                raise IntegrationError(
                    f"Newton failed at t={t_new:.6g}: residual {res:.3e} after "
                    f"{max_newton} iterations (tol {newton_tol:.1e})"
                )
            y = z
            t = t_new
            steps_since_refresh += 1
        _check_finite(y, t)
        out[k + 1] = y
    return out
