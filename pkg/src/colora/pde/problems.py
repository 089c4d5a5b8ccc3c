"""Benchmark PDE problems and their right-hand sides.

Each problem provides two views of the same dynamics:

* ``fom_rhs`` — method-of-lines tendency on a periodic grid, spatial
  derivatives by 4th-order central stencils (all problems are standardized
  on the same order);
* ``point_rhs`` — the pointwise right-hand side f(x, u, du, d2u; mu) used
  by the variational latent integration, with the network supplying u and
  its spatial derivatives at scattered sample points.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .. import kernels
from .grid import Grid, make_grid

TWO_PI = 2.0 * math.pi


@dataclass
class PDEProblem:
    name: str
    spatial_dim: int
    n_fields: int
    lo: tuple
    hi: tuple
    mu_range: tuple
    t_end: float
    default_scheme: str
    field_names: tuple
    constants: dict = field(default_factory=dict)
    ic: Callable = None
    fom_rhs: Callable = None  # (fields (F,*n), mu, grid) -> (F,*n)
    point_rhs: Callable = None  # (x (n,d), u (n,F), du (d,n,F), d2u (d,n,F), mu) -> (n,F)
    reduced_fields: Optional[tuple] = None  # dataset field indices the surrogate models
    default_dt: float = 1e-2
    default_tol: float = 1e-8

    def default_grid(self, points):
        return make_grid(self.lo, self.hi, points, periodic=True)

    def initial_condition(self, grid: Grid, mu):
        return self.ic(grid, mu)


def _d1(u, axis, dx):
    return kernels.diff1_periodic(u, axis, dx)


def _d2(u, axis, dx):
    return kernels.diff2_periodic(u, axis, dx)


# ---------------------------------------------------------------------------
# linear advection (1D): the contrived transport example


def advection_exact(u0, t, mu, x, period=1.0):
    """u0((x - t*mu) mod period): the closed-form transported profile."""
    x = np.asarray(x, dtype=np.float64)
    return u0(np.mod(x - t * mu, period))


def _advection_ic(grid, mu):
    x = grid.coords(0)
    return _gauss_bump(x)[None]


def _gauss_bump(z):
    return np.exp(-100.0 * (z - 0.5) ** 2)


def _advection_fom_rhs(fields, mu, grid):
    u = fields[0]
    return (-mu * _d1(u, 0, grid.dx[0]))[None]


def _advection_point_rhs(x, u, du, d2u, mu):
    return -mu * du[0]


def make_advection():
    return PDEProblem(
        name="advection",
        spatial_dim=1,
        n_fields=1,
        lo=(0.0,),
        hi=(1.0,),
        mu_range=(0.5, 1.5),
        t_end=1.0,
        default_scheme="dopri5-adaptive",
        field_names=("u",),
        ic=_advection_ic,
        fom_rhs=_advection_fom_rhs,
        point_rhs=_advection_point_rhs,
        default_tol=1e-8,
    )


# ---------------------------------------------------------------------------
# viscous Burgers, 1D and 2D


_BURGERS_SCALE = (14.0 * math.pi) ** 2
_BURGERS_CENTER = math.pi / 10.0


def _burgers_profile(r2):
    # compact advecting front: exp(-(14 pi)^2 * r^4) with r^2 given
    return np.exp(-_BURGERS_SCALE * r2 * r2)


def _burgers1d_ic(grid, mu):
    x = grid.coords(0)
    return _burgers_profile((x - _BURGERS_CENTER) ** 2)[None]


def _burgers1d_fom_rhs(fields, mu, grid):
    u = fields[0]
    dx = grid.dx[0]
    return (-u * _d1(u, 0, dx) + mu * _d2(u, 0, dx))[None]


def _burgers1d_point_rhs(x, u, du, d2u, mu):
    return -u * du[0] + mu * d2u[0]


def make_burgers1d():
    return PDEProblem(
        name="burgers1d",
        spatial_dim=1,
        n_fields=1,
        lo=(0.0,),
        hi=(1.0,),
        mu_range=(1e-3, 1e-2),
        t_end=1.0,
        default_scheme="implicit-euler-newton",
        field_names=("u",),
        ic=_burgers1d_ic,
        fom_rhs=_burgers1d_fom_rhs,
        point_rhs=_burgers1d_point_rhs,
        default_dt=5e-3,
    )


def _burgers2d_ic(grid, mu):
    X, Y = grid.meshes()
    r2 = (X - _BURGERS_CENTER) ** 2 + (Y - _BURGERS_CENTER) ** 2
    u = _burgers_profile(r2)
    return np.stack([u, u.copy()])


def _burgers2d_fom_rhs(fields, mu, grid):
    u, v = fields
    dx, dy = grid.dx
    ux, uy = _d1(u, 0, dx), _d1(u, 1, dy)
    vx, vy = _d1(v, 0, dx), _d1(v, 1, dy)
    lap_u = _d2(u, 0, dx) + _d2(u, 1, dy)
    lap_v = _d2(v, 0, dx) + _d2(v, 1, dy)
    return np.stack([-u * ux - v * uy + mu * lap_u, -u * vx - v * vy + mu * lap_v])


def _burgers2d_point_rhs(x, u, du, d2u, mu):
    # symmetric initial data keeps v = u for all time; the surrogate models
    # the single field u, so v is substituted by u here
    return -u * (du[0] + du[1]) + mu * (d2u[0] + d2u[1])


def make_burgers2d():
    return PDEProblem(
        name="burgers2d",
        spatial_dim=2,
        n_fields=2,
        lo=(0.0, 0.0),
        hi=(1.0, 1.0),
        mu_range=(1e-3, 1e-2),
        t_end=1.0,
        default_scheme="implicit-euler-newton",
        field_names=("u", "v"),
        ic=_burgers2d_ic,
        fom_rhs=_burgers2d_fom_rhs,
        point_rhs=_burgers2d_point_rhs,
        reduced_fields=(0,),
        default_dt=1e-2,
    )


# ---------------------------------------------------------------------------
# Vlasov: collisionless transport in a fixed electric field


def electric_field(x1):
    """d/dx of the fixed potential -(0.2 + 0.2 cos(pi x^4) + 0.1 sin(pi x))."""
    x1 = np.asarray(x1, dtype=np.float64)
    return 0.8 * math.pi * x1**3 * np.sin(math.pi * x1**4) - 0.1 * math.pi * np.cos(
        math.pi * x1
    )


def _vlasov_ic(grid, mu):
    X1, X2 = grid.meshes()
    shift = 0.2 - mu
    return np.exp(-100.0 * ((X1 - shift) ** 2 + (X2 - shift) ** 2))[None]


def _vlasov_fom_rhs(fields, mu, grid):
    u = fields[0]
    dx1, dx2 = grid.dx
    x1 = grid.coords(0)
    x2 = grid.coords(1)
    du1 = _d1(u, 0, dx1)
    du2 = _d1(u, 1, dx2)
    return (-x2[None, :] * du1 + electric_field(x1)[:, None] * du2)[None]


def _vlasov_point_rhs(x, u, du, d2u, mu):
    return -x[:, 1:2] * du[0] + electric_field(x[:, 0])[:, None] * du[1]


def make_vlasov():
    return PDEProblem(
        name="vlasov",
        spatial_dim=2,
        n_fields=1,
        lo=(-1.0, -1.0),
        hi=(1.0, 1.0),
        mu_range=(0.2, 0.4),
        t_end=5.0,
        default_scheme="dopri5-adaptive",
        field_names=("u",),
        ic=_vlasov_ic,
        fom_rhs=_vlasov_fom_rhs,
        point_rhs=_vlasov_point_rhs,
        default_tol=1e-8,
    )


# ---------------------------------------------------------------------------
# rotating detonation engine: two coupled reaction-advection-diffusion fields

RDE_CONSTANTS = {
    "nu": 0.025,
    "k_pre": 1.0,
    "alpha": 0.3,
    "eta_c": 1.1,
    "eta_p": 0.5,
    "r": 5.0,
    "eps": 0.11,
}


def rde_heat_release(eta, c=RDE_CONSTANTS):
    return c["k_pre"] * np.exp((eta - c["eta_c"]) / c["alpha"])


def rde_injection(eta, mu, c=RDE_CONSTANTS):
    return mu / (1.0 + np.exp(c["r"] * (eta - c["eta_p"])))


def rde_energy_loss(eta, c=RDE_CONSTANTS):
    return -c["eps"] * eta


def _rde_ic(grid, mu):
    x = grid.coords(0)
    eta = 0.4 * np.exp(-2.25 * (x - math.pi) ** 2) + 1.0
    lam = np.full_like(x, 0.75)
    return np.stack([eta, lam])


def _rde_fom_rhs(fields, mu, grid):
    eta, lam = fields
    dx = grid.dx[0]
    c = RDE_CONSTANTS
    omega = rde_heat_release(eta)
    gain = (1.0 - lam) * omega
    deta = -eta * _d1(eta, 0, dx) + c["nu"] * _d2(eta, 0, dx) + gain + rde_energy_loss(eta)
    dlam = c["nu"] * _d2(lam, 0, dx) + gain - rde_injection(eta, mu) * lam
    return np.stack([deta, dlam])


def _rde_point_rhs(x, u, du, d2u, mu):
    c = RDE_CONSTANTS
    eta, lam = u[:, 0], u[:, 1]
    omega = rde_heat_release(eta)
    gain = (1.0 - lam) * omega
    deta = -eta * du[0][:, 0] + c["nu"] * d2u[0][:, 0] + gain + rde_energy_loss(eta)
    dlam = c["nu"] * d2u[0][:, 1] + gain - rde_injection(eta, mu) * lam
    return np.stack([deta, dlam], axis=1)


def make_rde():
    return PDEProblem(
        name="rde",
        spatial_dim=1,
        n_fields=2,
        lo=(0.0,),
        hi=(TWO_PI,),
        mu_range=(2.0, 3.1),
        t_end=20.0,
        default_scheme="implicit-euler-newton",
        field_names=("eta", "lambda"),
        constants=dict(RDE_CONSTANTS),
        ic=_rde_ic,
        fom_rhs=_rde_fom_rhs,
        point_rhs=_rde_point_rhs,
        default_dt=1e-2,
    )


_REGISTRY = {
    "advection": make_advection,
    "burgers1d": make_burgers1d,
    "burgers2d": make_burgers2d,
    "vlasov": make_vlasov,
    "rde": make_rde,
}

DESK_GRIDS = {
    "advection": (512,),
    "burgers1d": (256,),
    "burgers2d": (128, 128),
    "vlasov": (128, 128),
    "rde": (256,),
}


def get_problem(name) -> PDEProblem:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {sorted(_REGISTRY)}") from None
