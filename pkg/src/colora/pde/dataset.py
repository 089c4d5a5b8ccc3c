"""Trajectory data: full-order solves, snapshot sets, train/test splits."""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from .grid import Grid
from .integrate import (
    StencilColoring,
    dopri5_solve,
    implicit_euler_solve,
    rk4_solve,
)
from .problems import PDEProblem

SCHEMES = ("rk4-fixed", "dopri5-adaptive", "implicit-euler-newton")


@dataclass
class Trajectory:
    mu: float
    t_grid: np.ndarray  # (K,)
    fields: np.ndarray  # (K, F, *grid.n)

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=np.float64)
        self.fields = np.asarray(self.fields, dtype=np.float64)
        if np.any(np.diff(self.t_grid) <= 0):
            raise InvalidInputError("time grid must be strictly increasing")
        if not np.all(np.isfinite(self.fields)):
            raise InvalidInputError("trajectory contains non-finite values")

    @property
    def n_fields(self):
        return self.fields.shape[1]


@dataclass
class SnapshotSet:
    problem: str
    grid: Grid
    trajectories: list

    def __post_init__(self):
        if self.trajectories:
            t0 = self.trajectories[0].t_grid
            for tr in self.trajectories:
                if tr.t_grid.shape != t0.shape or not np.array_equal(tr.t_grid, t0):
                    raise InvalidInputError("trajectories must share one time grid")
                if tr.fields.shape != self.trajectories[0].fields.shape:
                    raise InvalidInputError("trajectories must share grid and fields")

    def __len__(self):
        return len(self.trajectories)

    @property
    def t_grid(self):
        return self.trajectories[0].t_grid

    @property
    def mus(self):
        return np.array([tr.mu for tr in self.trajectories])

    @property
    def n_fields(self):
        return self.trajectories[0].fields.shape[1]

    def select_fields(self, indices):
        """Snapshot set restricted to a subset of fields (e.g. the single
        field a surrogate models when the full-order model carries two)."""
        idx = list(indices)
        return SnapshotSet(
            self.problem,
            self.grid,
            [
                Trajectory(tr.mu, tr.t_grid.copy(), tr.fields[:, idx].copy())
                for tr in self.trajectories
            ],
        )

    def frames_matrix(self):
        """Snapshot matrix: one column per (trajectory, time) frame,
        flattened field-major then row-major space."""
        cols = [
            tr.fields[k].ravel()
            for tr in self.trajectories
            for k in range(tr.t_grid.size)
        ]
        return np.stack(cols, axis=1)

    def max_field_abs(self):
        return max(float(np.max(np.abs(tr.fields))) for tr in self.trajectories)


_COLORING_CACHE = {}


def _coloring_for(problem: PDEProblem, grid: Grid):
    key = (grid.n, problem.n_fields)
    if key not in _COLORING_CACHE:
        _COLORING_CACHE[key] = StencilColoring(grid.n, problem.n_fields)
    return _COLORING_CACHE[key]


def integrate(
    problem: PDEProblem,
    mu,
    grid: Grid,
    scheme=None,
    t_out=None,
    dt=None,
    tol=None,
    newton_tol=1e-12,
    jac_refresh="auto",
) -> Trajectory:
    """Full-order solve of one trajectory on the requested output time grid."""
    scheme = scheme or problem.default_scheme
    if scheme not in SCHEMES:
        raise InvalidInputError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if t_out is None:
        raise InvalidInputError("t_out time grid required")
    t_out = np.asarray(t_out, dtype=np.float64)
    shape = (problem.n_fields,) + grid.n
    y0 = problem.initial_condition(grid, mu).reshape(-1)

    def f(t, y):
        return problem.fom_rhs(y.reshape(shape), mu, grid).reshape(-1)

    if scheme == "rk4-fixed":
        ys = rk4_solve(f, y0, t_out, dt or problem.default_dt)
    elif scheme == "dopri5-adaptive":
        tl = tol if tol is not None else problem.default_tol
        ys = dopri5_solve(f, y0, t_out, rtol=tl, atol=tl)
    else:
        ys = implicit_euler_solve(
            f,
            y0,
            t_out,
            dt or problem.default_dt,
            newton_tol=newton_tol,
            coloring=_coloring_for(problem, grid),
            refresh=jac_refresh,
        )
    return Trajectory(float(mu), t_out, ys.reshape((t_out.size,) + shape))


def generate_dataset(
    problem: PDEProblem, mu_list, grid: Grid, t_out, scheme=None, **kwargs
) -> SnapshotSet:
    """One trajectory per physics parameter; deterministic."""
    trajectories = [
        integrate(problem, mu, grid, scheme=scheme, t_out=t_out, **kwargs)
        for mu in mu_list
    ]
    return SnapshotSet(problem.name, grid, trajectories)


# ---------------------------------------------------------------------------
# physics-parameter splits

# fixed benchmark splits (train, test)
TRAIN_TEST_SPLITS = {
    "vlasov": (
        [0.2, 0.224, 0.274, 0.3, 0.326, 0.376, 0.4],
        [0.25, 0.35],
    ),
    "burgers": (
        [0.001, 0.00199, 0.00298, 0.00496, 0.00595, 0.00694, 0.00892, 0.01],
        [0.00397, 0.00793],
    ),
    "rde": (
        [2.0, 2.1, 2.2, 2.4, 2.5, 2.6, 2.8, 2.9, 3.0, 3.1],
        [2.3, 2.7],
    ),
}

# equally-spaced test triplets used by the data-efficiency sweep
DATA_EFFICIENCY_TESTS = {
    "burgers": [0.00253, 0.0055, 0.00847],
    "vlasov": [0.234, 0.3, 0.366],
}


def candidate_grid(mu_range, count=101):
    return np.linspace(mu_range[0], mu_range[1], count)


def select_train_test(mu_grid, m, test_mus):
    """Greedy training-parameter selection.

    Repeatedly add the candidate whose minimum distance to the test set is
    largest, ties broken by the smaller parameter value.  With the distance
    measured against the fixed test set this reduces to ranking the
    candidates once.
    """
    mu_grid = np.asarray(mu_grid, dtype=np.float64)
    test_mus = np.asarray(test_mus, dtype=np.float64)
    is_test = np.zeros(mu_grid.size, dtype=bool)
    for tv in test_mus:
        j = int(np.argmin(np.abs(mu_grid - tv)))
        if abs(mu_grid[j] - tv) > 1e-9 * max(1.0, abs(tv)):
            raise InvalidInputError(f"test value {tv} not in the candidate grid")
        is_test[j] = True
    pool = np.nonzero(~is_test)[0]
    if m > pool.size:
        raise InvalidInputError(f"m={m} exceeds {pool.size} available candidates")
    dist = np.min(np.abs(mu_grid[pool, None] - test_mus[None, :]), axis=1)
    order = sorted(range(pool.size), key=lambda i: (-dist[i], mu_grid[pool[i]]))
    chosen = mu_grid[pool[order[:m]]] if m else np.array([])
    return np.sort(chosen)
