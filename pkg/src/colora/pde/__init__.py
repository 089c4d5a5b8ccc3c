from .dataset import (
    DATA_EFFICIENCY_TESTS,
    TRAIN_TEST_SPLITS,
    SnapshotSet,
    Trajectory,
    candidate_grid,
    generate_dataset,
    integrate,
    select_train_test,
)
from .grid import Grid, make_grid
from .integrate import dopri5_solve, implicit_euler_solve, rk4_solve
from .problems import DESK_GRIDS, PDEProblem, advection_exact, get_problem

__all__ = [
    "DATA_EFFICIENCY_TESTS",
    "DESK_GRIDS",
    "TRAIN_TEST_SPLITS",
    "Grid",
    "PDEProblem",
    "SnapshotSet",
    "Trajectory",
    "advection_exact",
    "candidate_grid",
    "dopri5_solve",
    "generate_dataset",
    "get_problem",
    "implicit_euler_solve",
    "integrate",
    "make_grid",
    "rk4_solve",
    "select_train_test",
]
