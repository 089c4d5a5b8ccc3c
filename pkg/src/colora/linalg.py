"""Dense linear-algebra kernels: thin SVD and least-squares solvers.

The SVD is a cyclic one-sided Jacobi iteration (orthogonalize columns,
accumulate right rotations), switching to an eigendecomposition of the
smaller Gram matrix for very tall matrices.  Both routes are deterministic:
identical inputs give bit-identical outputs within one build.  Sizes here
are small (a few thousand rows, tens of columns), where Jacobi is accurate
and the O(n^2) sweep cost is irrelevant.
"""

from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import InvalidInputError

JACOBI_TOL = 1e-14
MAX_SWEEPS = 100
GRAM_ROW_RATIO = 4
DEFAULT_REL_TOL = 1e-10


class SvdResult(NamedTuple):
    U: np.ndarray
    S: np.ndarray
    Vt: np.ndarray


class ConstrainedLstsq(NamedTuple):
    x: np.ndarray
    degenerate: bool


def _as_matrix(M, name="matrix"):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise InvalidInputError(f"{name} must be 2-D and non-empty, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return M


def _complete_orthonormal(Q, m, count):
    """Append `count` orthonormal columns to the m-row block Q.

    Deterministic: candidates are taken from identity columns and
    re-orthogonalized (two Gram-Schmidt passes) until one survives.
    """
    cols = [Q[:, i] for i in range(Q.shape[1])]
    added = []
    cand = 0
    while len(added) < count:
        if cand >= m:
            raise RuntimeError("failed to complete orthonormal basis")
        v = np.zeros(m)
        v[cand] = 1.0
        cand += 1
        for _ in range(2):
            for u in cols:
                v = v - (u @ v) * u
        nrm = np.linalg.norm(v)
        if nrm > 0.5:
            v = v / nrm
            cols.append(v)
            added.append(v)
    return np.column_stack(added) if added else np.zeros((m, 0))


def _svd_tall(M):
    """SVD of M with rows >= cols."""
    m, n = M.shape
    if m > GRAM_ROW_RATIO * n:
        G = M.T @ M
        V = np.eye(n)
        kernels.jacobi_sym_eig(G, V, JACOBI_TOL, MAX_SWEEPS)
        lam = np.diag(G).copy()
        order = np.argsort(-lam, kind="stable")
        lam = lam[order]
        V = V[:, order]
        S = np.sqrt(np.maximum(lam, 0.0))
        cols = M @ V
    else:
        A = np.ascontiguousarray(M, dtype=np.float64).copy()
        V = np.eye(n)
        kernels.jacobi_orthogonalize(A, V, JACOBI_TOL, MAX_SWEEPS)
        S = np.sqrt(np.sum(A * A, axis=0))
        order = np.argsort(-S, kind="stable")
        S = S[order]
        V = V[:, order]
        cols = A[:, order]

    smax = S[0] if S.size else 0.0
    cutoff = smax * max(m, n) * np.finfo(np.float64).eps
    U = np.empty((m, n))
    dead = []
    for i in range(n):
        if S[i] > cutoff:
            U[:, i] = cols[:, i] / S[i]
        else:
            dead.append(i)
    if dead:
        live = U[:, [i for i in range(n) if i not in dead]]
        fill = _complete_orthonormal(live, m, len(dead))
        for j, i in enumerate(dead):
            U[:, i] = fill[:, j]
    return SvdResult(U, S, V.T)


def svd(M) -> SvdResult:
    """Thin SVD M = U @ diag(S) @ Vt with S descending.

    U is m x k and Vt is k x n with k = min(m, n); columns of U and rows of
    Vt are orthonormal.
    """
    M = _as_matrix(M)
    m, n = M.shape
    if m >= n:
        return _svd_tall(M)
    U, S, Vt = _svd_tall(M.T)
    return SvdResult(Vt.T, S, U.T)


def lstsq_min_norm(A, b, rel_tol=DEFAULT_REL_TOL):
    """Minimum-norm minimizer of ||A x - b||_2.

    Singular values below rel_tol * S_max are truncated (treated as exact
    zeros), which makes the solve well defined for rank-deficient A.
    """
    return lstsq_min_norm_info(A, b, rel_tol)[0]


def lstsq_min_norm_info(A, b, rel_tol=DEFAULT_REL_TOL):
    """lstsq_min_norm plus the post-truncation rank."""
    A = _as_matrix(A, "A")
    b = np.asarray(b, dtype=np.float64).ravel()
    if A.shape[0] != b.shape[0]:
        raise InvalidInputError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
    U, S, Vt = svd(A)
    cutoff = rel_tol * (S[0] if S.size else 0.0)
    coeff = U.T @ b
    x = np.zeros(A.shape[1])
    rank = 0
    for i in range(S.size):
        if S[i] > cutoff:
            x += (coeff[i] / S[i]) * Vt[i]
            rank += 1
    return x, rank


def lstsq_constrained(A, b, C, rel_tol=DEFAULT_REL_TOL) -> ConstrainedLstsq:
    """Minimize ||A x - b||_2 subject to C x = 0 by the nullspace method.

    An orthonormal basis N of null(C) comes from the SVD of C (rank decided
    by rel_tol truncation); the unconstrained problem in A @ N is solved and
    mapped back.  If the constraint kills every direction the solve is
    flagged degenerate and x = 0 is returned.
    """
    A = _as_matrix(A, "A")
    C = _as_matrix(C, "C")
    if C.shape[1] != A.shape[1]:
        raise InvalidInputError(
            f"C has {C.shape[1]} columns but A has {A.shape[1]}"
        )
    n = A.shape[1]
    _, S, Vt = svd(C)
    cutoff = rel_tol * (S[0] if S.size else 0.0)
    rank = int(np.sum(S > cutoff))
    if rank >= n:
        return ConstrainedLstsq(np.zeros(n), True)
    row_basis = Vt[:rank].T  # n x rank, orthonormal
    N = _complete_orthonormal(row_basis, n, n - rank)
    z = lstsq_min_norm(A @ N, b, rel_tol)
    return ConstrainedLstsq(N @ z, False)
