"""Online prediction at new physics parameters.

Two routes: forecast_D evaluates the hyper-network at (t, mu) and renders
fields (purely data-driven, no PDE anywhere); integrate_EQ evolves the
latent state by the Dirac-Frenkel/Galerkin condition — at every time the
least-squares problem  min ||J(phi) phi_dot - f(phi)||  projects the PDE
right-hand side onto the tangent space of the network manifold.  A linear
constraint row C(phi) (the gradient of the quadrature mass) makes the
integration mass-conserving; accepted states are additionally projected
back onto the initial mass level set so the invariant holds to round-off
over the whole horizon.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .autodiff import jac_latent
from .autodiff.dual import seed
from .autodiff import ops
from .net import hyper_eval, net_forward
from .pde.grid import make_grid
from .pde.integrate import dopri5_solve
from .pde.problems import PDEProblem

log = logging.getLogger(__name__)


def _model_forward(net, theta, phi, x):
    # ColoraNet or any callable model(theta, phi, x) written against the ops
    from .net import ColoraNet

    if isinstance(net, ColoraNet):
        return net_forward(net, theta, phi, x)
    return net(theta, phi, x)


@dataclass
class NGConfig:
    n_x: Optional[int] = None  # None: full grid (1D) or 64^2 lattice (2D)
    sampling: str = "grid"  # "grid" | "random"
    sample_seed: int = 0
    lstsq_rel_tol: float = 1e-10
    rtol: float = 1e-6
    atol: float = 1e-6
    conserve_mass: bool = False
    fit_initial: bool = False

    def to_dict(self):
        return {
            "n_x": self.n_x,
            "sampling": self.sampling,
            "sample_seed": self.sample_seed,
            "lstsq_rel_tol": self.lstsq_rel_tol,
            "rtol": self.rtol,
            "atol": self.atol,
            "conserve_mass": self.conserve_mass,
            "fit_initial": self.fit_initial,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class LatentTrajectory:
    t: np.ndarray  # (K,)
    phi: np.ndarray  # (K, q)
    residuals: np.ndarray  # (K,) least-squares residual at the output times
    accepted_t: np.ndarray = None
    accepted_residuals: np.ndarray = None
    accepted_cdot: np.ndarray = None  # |C . phi_dot| per accepted step (conservation on)
    degenerate_steps: int = 0
    mass: np.ndarray = None  # quadrature mass at output times (conservation runs)


# ---------------------------------------------------------------------------
# data-driven route


def forecast_D(checkpoint, mu, times, x_points, chunk=65536):
    """Fields at (times x x_points) by hyper-network evaluation alone."""
    net, hyper = checkpoint.model()
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    x_points = np.asarray(x_points, dtype=np.float64).reshape(-1, net.spatial_dim)
    norm = checkpoint.normalizer
    lo_t, hi_t = _seen_range(norm.t_mean, norm.t_std)
    if times.min() < lo_t or times.max() > hi_t:
        log.warning("forecast times extrapolate beyond the training range")
    phis = hyper_eval(hyper, norm, times, np.atleast_1d(mu), checkpoint.params)
    out = np.empty((times.size, x_points.shape[0], net.n_fields))
    for k in range(times.size):
        rows = []
        for start in range(0, x_points.shape[0], chunk):
            xb = x_points[start : start + chunk]
            rows.append(ops.value_of(net_forward(net, checkpoint.params, phis[k], xb)))
        out[k] = np.concatenate(rows, axis=0)
    return out


def _seen_range(mean, std, spread=5.0):
    return mean - spread * std, mean + spread * std


def export_latents(checkpoint, mus, times, phi_fn=None):
    """Rows (mu, t, phi_1..phi_q) from the hyper-network (or a custom rule)."""
    net, hyper = checkpoint.model() if checkpoint is not None else (None, None)
    rows = []
    for mu in np.atleast_1d(mus):
        for t in np.atleast_1d(times):
            if phi_fn is not None:
                phi = np.atleast_1d(phi_fn(t, mu))
            else:
                phi = hyper_eval(hyper, checkpoint.normalizer, t, mu, checkpoint.params)
            rows.append(np.concatenate([[mu, t], phi]))
    return np.asarray(rows)


# ---------------------------------------------------------------------------
# equation-driven route


def ng_sample_points(problem: PDEProblem, cfg: NGConfig, fom_grid=None):
    """Collocation points for the variational solve."""
    d = problem.spatial_dim
    if cfg.sampling == "random":
        rng = np.random.default_rng(cfg.sample_seed)
        n = cfg.n_x or (4096 if d > 1 else 512)
        lo = np.asarray(problem.lo)
        hi = np.asarray(problem.hi)
        return lo + (hi - lo) * rng.random((n, d))
    if d == 1:
        if cfg.n_x is None and fom_grid is not None:
            return fom_grid.points()
        n = cfg.n_x or 512
        return make_grid(problem.lo, problem.hi, (n,)).points()
    per_axis = int(round((cfg.n_x or 64**2) ** (1.0 / d)))
    return make_grid(problem.lo, problem.hi, (per_axis,) * d).points()


def ng_assemble(net, theta, phi, t, x_samples, problem: PDEProblem, mu, fused=None):
    """Batch gradient matrix J (n_x*F x q) and right-hand side f (n_x*F,).

    J holds the latent-state derivatives of the network outputs at the
    sample points; f evaluates the PDE right-hand side on the network's
    value and spatial derivatives (forward-mode, pure directions, second
    order where needed).  A FusedModel computes all of it in one packed
    kernel pass; the generic forward-mode path is the fallback.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if fused is not None:
        val, J, d1, d2 = fused.dual_eval(x_samples, phi, want_second=True)
    else:
        J = jac_latent(lambda ph, xb: _model_forward(net, theta, ph, xb), phi, x_samples)
        d = x_samples.shape[1]
        out = _model_forward(net, theta, phi, seed(x_samples, np.eye(d), second=True))
        val, d1, d2 = out.val, out.d1, out.d2
    f = problem.point_rhs(x_samples, val, d1, d2, mu)
    n_rows = int(np.prod(np.asarray(f).shape))
    return J.reshape(n_rows, phi.size), np.asarray(f).reshape(n_rows)


def conserve_mass_constraint(net, theta, phi, x_samples, weights, J=None):
    """Constraint row C with C_j = sum_k w_k d(u_hat(x_k))/d(phi_j).

    C . phi_dot is then the time derivative of the quadrature mass of the
    first output field.
    """
    if J is None:
        Jfull = jac_latent(lambda ph, xb: _model_forward(net, theta, ph, xb), phi, x_samples)
        J = Jfull[:, 0, :] if Jfull.ndim == 3 else Jfull
    w = np.asarray(weights, dtype=np.float64)
    return w @ J


@dataclass
class NGInfo:
    residual: float
    rhs_norm: float
    degenerate: bool
    cdot: float = 0.0


def ng_rhs(net, theta, phi, t, x_samples, problem, mu, cfg: NGConfig, weights=None, fused=None):
    """Galerkin-optimal latent velocity at (t, phi); returns (phi_dot, info)."""
    J, f = ng_assemble(net, theta, phi, t, x_samples, problem, mu, fused=fused)
    if cfg.conserve_mass:
        n = x_samples.shape[0]
        Jmass = J.reshape(n, -1, phi.size)[:, 0, :]  # field-0 rows
        C = (np.asarray(weights) @ Jmass)[None, :]
        sol = linalg.lstsq_constrained(J, f, C, cfg.lstsq_rel_tol)
        phi_dot, degenerate = sol.x, sol.degenerate
        cdot = float(abs(C[0] @ phi_dot))
    else:
        phi_dot, rank = linalg.lstsq_min_norm_info(J, f, cfg.lstsq_rel_tol)
        degenerate = rank == 0
        cdot = 0.0
    resid = float(np.linalg.norm(J @ phi_dot - f))
    return phi_dot, NGInfo(resid, float(np.linalg.norm(f)), degenerate, cdot)


def _fit_initial_latent(net, theta, phi0, x_samples, target, rel_tol, iters=30):
    """Gauss-Newton fit of phi to the target field values at the samples."""
    phi = np.asarray(phi0, dtype=np.float64).copy()
    for _ in range(iters):
        val = ops.value_of(_model_forward(net, theta, phi, x_samples)).reshape(-1)
        r = target.reshape(-1) - val
        J = jac_latent(lambda ph, xb: _model_forward(net, theta, ph, xb), phi, x_samples)
        J = J.reshape(r.size, phi.size)
        step = linalg.lstsq_min_norm(J, r, rel_tol)
        phi = phi + step
        if np.linalg.norm(step) < 1e-12 * (1.0 + np.linalg.norm(phi)):
            break
    return phi


def _mass_of(net, theta, phi, x_samples, weights, fused=None):
    if fused is not None:
        val, _, _, _ = fused.dual_eval(x_samples, phi, want_second=False)
    else:
        val = ops.value_of(_model_forward(net, theta, phi, x_samples))
    val = val.reshape(val.shape[0], -1)
    return float(np.asarray(weights) @ val[:, 0])


def _project_mass(net, theta, phi, x_samples, weights, target, tol=1e-13, iters=5, fused=None):
    """Newton projection of phi onto the mass level set, along the mass
    gradient direction."""
    phi = phi.copy()
    for _ in range(iters):
        if fused is not None:
            val, Jf, _, _ = fused.dual_eval(x_samples, phi, want_second=False)
            g = float(np.asarray(weights) @ val[:, 0]) - target
            C = np.asarray(weights) @ Jf[:, 0, :]
        else:
            g = _mass_of(net, theta, phi, x_samples, weights) - target
            C = conserve_mass_constraint(net, theta, phi, x_samples, weights)
        if abs(g) <= tol * max(1.0, abs(target)):
            break
        cc = float(C @ C)
        if cc <= 0.0:
            break
        phi = phi - (g / cc) * C
    return phi


def integrate_EQ_model(
    net,
    theta,
    phi0,
    mu,
    t_out,
    cfg: NGConfig,
    problem: PDEProblem,
    fom_grid=None,
) -> LatentTrajectory:
    """Evolve a latent state by adaptive integration of the Galerkin ODE."""
    t_out = np.asarray(t_out, dtype=np.float64)
    phi0 = np.asarray(phi0, dtype=np.float64)
    x_samples = ng_sample_points(problem, cfg, fom_grid)
    n = x_samples.shape[0]
    if n < phi0.size:
        raise ValueError(f"n_x={n} below latent dimension q={phi0.size}")
    span = np.asarray(problem.hi) - np.asarray(problem.lo)
    weights = np.full(n, float(np.prod(span)) / n)

    if cfg.fit_initial:
        u0 = problem.initial_condition(_samples_grid(problem, x_samples), mu)
        phi0 = _fit_initial_latent(
            net, theta, phi0, x_samples, u0[0].reshape(-1), cfg.lstsq_rel_tol
        )

    if t_out.size == 1:
        return LatentTrajectory(
            t=t_out.copy(),
            phi=phi0[None, :].copy(),
            residuals=np.zeros(1),
            accepted_t=np.zeros(0),
            accepted_residuals=np.zeros(0),
            accepted_cdot=np.zeros(0),
        )

    fused = None
    from . import fastpath
    from .net import ColoraNet

    if isinstance(net, ColoraNet) and fastpath.available(net):
        fused = fastpath.FusedModel(net, theta)

    mass0 = _mass_of(net, theta, phi0, x_samples, weights, fused) if cfg.conserve_mass else None
    state = {"degenerate": 0}
    acc_t, acc_res, acc_cdot = [], [], []

    def rhs(t, phi):
        phi_dot, info = ng_rhs(net, theta, phi, t, x_samples, problem, mu, cfg, weights, fused)
        if info.degenerate:
            state["degenerate"] += 1
        return phi_dot

    def observer(t_new, y_new):
        _, info = ng_rhs(net, theta, y_new, t_new, x_samples, problem, mu, cfg, weights, fused)
        acc_t.append(t_new)
        acc_res.append(info.residual)
        acc_cdot.append(info.cdot)

    project = None
    if cfg.conserve_mass:
        def project(t_new, y_new):
            return _project_mass(net, theta, y_new, x_samples, weights, mass0, fused=fused)

    phis = dopri5_solve(
        rhs, phi0, t_out, rtol=cfg.rtol, atol=cfg.atol,
        step_observer=observer, project=project,
    )
    if cfg.conserve_mass:
        for k in range(1, t_out.size):
            phis[k] = _project_mass(net, theta, phis[k], x_samples, weights, mass0, fused=fused)

    residuals = np.empty(t_out.size)
    for k in range(t_out.size):
        _, info = ng_rhs(net, theta, phis[k], t_out[k], x_samples, problem, mu, cfg, weights, fused)
        residuals[k] = info.residual
    mass = None
    if cfg.conserve_mass:
        mass = np.array(
            [_mass_of(net, theta, phis[k], x_samples, weights, fused) for k in range(t_out.size)]
        )
    return LatentTrajectory(
        t=t_out.copy(),
        phi=phis,
        residuals=residuals,
        accepted_t=np.asarray(acc_t),
        accepted_residuals=np.asarray(acc_res),
        accepted_cdot=np.asarray(acc_cdot),
        degenerate_steps=state["degenerate"],
        mass=mass,
    )


def integrate_EQ(
    checkpoint,
    mu,
    t_out,
    cfg: NGConfig,
    problem: PDEProblem,
    fom_grid=None,
) -> LatentTrajectory:
    """Checkpoint-level equation-driven prediction.

    The initial latent state comes from the hyper-network at the first
    output time (or from a least-squares fit to the initial condition when
    cfg.fit_initial is set)."""
    net, hyper = checkpoint.model()
    t_out = np.asarray(t_out, dtype=np.float64)
    phi0 = hyper_eval(hyper, checkpoint.normalizer, float(t_out[0]), mu, checkpoint.params)
    return integrate_EQ_model(
        net, checkpoint.params, phi0, mu, t_out, cfg, problem, fom_grid
    )


def _samples_grid(problem, pts):
    # initial conditions are written against Grid objects; for scattered
    # samples we fake a grid-like carrier exposing meshes()/coords()
    class _Carrier:
        def __init__(self, pts):
            self._pts = pts

        def coords(self, axis):
            return self._pts[:, axis]

        def meshes(self):
            return [self._pts[:, a] for a in range(self._pts.shape[1])]

    return _Carrier(pts)


def render_fields(checkpoint, latent: LatentTrajectory, x_points, chunk=65536):
    """Field values for every latent state in the trajectory."""
    net, _ = checkpoint.model()
    x_points = np.asarray(x_points, dtype=np.float64).reshape(-1, net.spatial_dim)
    out = np.empty((latent.t.size, x_points.shape[0], net.n_fields))
    for k in range(latent.t.size):
        rows = []
        for start in range(0, x_points.shape[0], chunk):
            rows.append(
                ops.value_of(
                    net_forward(net, checkpoint.params, latent.phi[k], x_points[start : start + chunk])
                )
            )
        out[k] = np.concatenate(rows, axis=0)
    return out


# ---------------------------------------------------------------------------
# residual landscape diagnostic (q = 2)


def residual_landscape_model(net, theta, phi1_grid, phi2_grid, t, mu, cfg, problem, fom_grid=None):
    """Normalized least-squares residual over a 2-D latent lattice."""
    from . import fastpath
    from .net import ColoraNet

    fused = None
    if isinstance(net, ColoraNet) and fastpath.available(net):
        fused = fastpath.FusedModel(net, theta)
    x_samples = ng_sample_points(problem, cfg, fom_grid)
    out = np.empty((len(phi1_grid), len(phi2_grid)))
    for i, p1 in enumerate(phi1_grid):
        for j, p2 in enumerate(phi2_grid):
            phi = np.array([p1, p2], dtype=np.float64)
            J, f = ng_assemble(net, theta, phi, t, x_samples, problem, mu, fused=fused)
            phi_dot = linalg.lstsq_min_norm(J, f, cfg.lstsq_rel_tol)
            fn = np.linalg.norm(f)
            out[i, j] = np.linalg.norm(J @ phi_dot - f) / (fn if fn > 0 else 1.0)
    return out


def residual_landscape(checkpoint, phi1_grid, phi2_grid, t, mu, cfg, problem, fom_grid=None):
    if checkpoint.arch.q != 2:
        raise ValueError("residual landscape requires a q = 2 model")
    net, _ = checkpoint.model()
    return residual_landscape_model(
        net, checkpoint.params, phi1_grid, phi2_grid, t, mu, cfg, problem, fom_grid
    )
