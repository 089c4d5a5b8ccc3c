"""Kernel backend selection.

Hot numeric kernels (stencils, Jacobi sweeps, Adam updates, fused network
evaluation) exist twice: a numba @njit implementation and a pure-numpy
fallback.  The active backend is chosen once at import time from the
COLORA_BACKEND environment variable:

    COLORA_BACKEND=numba   force numba (error if numba missing)
    COLORA_BACKEND=numpy   force the pure-numpy path
    unset                  numba when importable, numpy otherwise

COLORA_THREADS caps the numba thread pool (we never rely on it for
determinism; all kernels with cross-element reductions run serially).
"""

import os

_choice = os.environ.get("COLORA_BACKEND", "").strip().lower()
if _choice not in ("", "numba", "numpy"):
    raise RuntimeError(f"COLORA_BACKEND must be 'numba' or 'numpy', got {_choice!r}")

if _choice == "numpy":
    NUMBA_ENABLED = False
else:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        if _choice == "numba":
            raise
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    _threads = os.environ.get("COLORA_THREADS")
    if _threads:
        import numba

        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))


def active_backend() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
