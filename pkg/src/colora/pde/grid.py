"""Uniform tensor-product grids."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform grid; periodic axes exclude the duplicate endpoint."""

    lo: tuple
    hi: tuple
    n: tuple
    periodic: tuple

    def __post_init__(self):
        if not (len(self.lo) == len(self.hi) == len(self.n) == len(self.periodic)):
            raise ValueError("inconsistent grid dimensions")

    @property
    def dim(self):
        return len(self.n)

    @property
    def dx(self):
        return tuple(
            (h - l) / (m if p else m - 1)
            for l, h, m, p in zip(self.lo, self.hi, self.n, self.periodic)
        )

    @property
    def npoints(self):
        return int(np.prod(self.n))

    def coords(self, axis):
        d = self.dx[axis]
        return self.lo[axis] + d * np.arange(self.n[axis])

    def meshes(self):
        """Coordinate arrays of shape self.n (ij indexing)."""
        return np.meshgrid(*[self.coords(a) for a in range(self.dim)], indexing="ij")

    def points(self):
        """All grid points flattened row-major, shape (npoints, dim)."""
        return np.stack([m.ravel() for m in self.meshes()], axis=1)

    def cell_volume(self):
        return float(np.prod(self.dx))


def make_grid(lo, hi, n, periodic=True):
    lo = tuple(float(v) for v in np.atleast_1d(lo))
    hi = tuple(float(v) for v in np.atleast_1d(hi))
    n = tuple(int(v) for v in np.atleast_1d(n))
    if isinstance(periodic, bool):
        periodic = tuple(periodic for _ in n)
    return Grid(lo, hi, n, tuple(periodic))
