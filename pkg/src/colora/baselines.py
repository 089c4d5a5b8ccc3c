"""Linear baselines: best-approximation projection error and parameter-space
linear interpolation of trajectories."""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import InvalidInputError
from .pde.dataset import SnapshotSet, Trajectory


@dataclass
class PodBasis:
    V: np.ndarray  # (dof, n), orthonormal columns
    singular_values: np.ndarray  # full retained spectrum

    @property
    def n(self):
        return self.V.shape[1]


def pod_basis(train: SnapshotSet, n: int) -> PodBasis:
    """Top-n left singular vectors of the training snapshot matrix."""
    S_train = train.frames_matrix()
    if n > min(S_train.shape):
        raise InvalidInputError(f"n={n} exceeds snapshot matrix rank bound {min(S_train.shape)}")
    U, s, _ = linalg.svd(S_train)
    return PodBasis(U[:, :n].copy(), s.copy())


def pod_error(train: SnapshotSet, test: SnapshotSet, n: int) -> float:
    """Relative Frobenius error of rank-n projection of the test snapshots.

    The training snapshot matrix provides the basis; test frames are
    projected into it and back, the error taken over the whole test matrix.
    """
    if train.grid.n != test.grid.n:
        raise InvalidInputError("train and test snapshot sets must share the grid")
    basis = pod_basis(train, n)
    S_test = test.frames_matrix()
    resid = S_test - basis.V @ (basis.V.T @ S_test)
    return float(np.linalg.norm(resid) / np.linalg.norm(S_test))


def pod_error_sweep(train: SnapshotSet, test: SnapshotSet, n_values):
    """(n, error) rows; the SVD is computed once."""
    S_train = train.frames_matrix()
    U, s, _ = linalg.svd(S_train)
    S_test = test.frames_matrix()
    norm = np.linalg.norm(S_test)
    rows = []
    for n in n_values:
        if n > min(S_train.shape):
            raise InvalidInputError(f"n={n} exceeds snapshot matrix rank bound")
        V = U[:, :n]
        resid = S_test - V @ (V.T @ S_test)
        rows.append((int(n), float(np.linalg.norm(resid) / norm)))
    return rows


def interp_baseline(train: SnapshotSet, mu_star: float) -> Trajectory:
    """Piecewise-linear interpolation between the two bracketing training
    trajectories; exact at knots, clamped outside the training range."""
    if len(train) < 2:
        raise InvalidInputError("interpolation needs at least two training trajectories")
    order = np.argsort(train.mus, kind="stable")
    mus = train.mus[order]
    trajs = [train.trajectories[i] for i in order]
    mu_star = float(mu_star)
    if mu_star <= mus[0]:
        fields = trajs[0].fields.copy()
    elif mu_star >= mus[-1]:
        fields = trajs[-1].fields.copy()
    else:
        j = int(np.searchsorted(mus, mu_star, side="right") - 1)
        j = min(j, mus.size - 2)
        w = (mu_star - mus[j]) / (mus[j + 1] - mus[j])
        fields = (1.0 - w) * trajs[j].fields + w * trajs[j + 1].fields
    return Trajectory(mu_star, train.t_grid.copy(), fields)


def interp_error(train: SnapshotSet, reference: Trajectory, eps_rel) -> float:
    """Mean relative error of the interpolation baseline against a
    reference trajectory, matching the surrogate's error metric."""
    pred = interp_baseline(train, reference.mu)
    eps = np.asarray(eps_rel, dtype=np.float64).reshape(
        (1, -1) + (1,) * (reference.fields.ndim - 2)
    )
    den = np.maximum(reference.fields**2, eps)
    return float(np.mean((pred.fields - reference.fields) ** 2 / den))
