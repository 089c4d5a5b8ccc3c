"""Backend-dispatched hot kernels.

Import the concrete implementation picked by colora.backend.  Both backends
export the same callables; `get_backend(name)` returns a specific module so
tests and the kernel benchmark can compare the two directly.
"""

from .. import backend as _backend
from . import numpy_backend

if _backend.NUMBA_ENABLED:
    from . import numba_backend as _impl
else:
    _impl = numpy_backend

diff1_periodic = _impl.diff1_periodic
diff2_periodic = _impl.diff2_periodic
adam_update = _impl.adam_update
jacobi_orthogonalize = _impl.jacobi_orthogonalize
jacobi_sym_eig = _impl.jacobi_sym_eig


def get_backend(name):
    if name == "numpy":
        return numpy_backend
    if name == "numba":
        from . import numba_backend

        return numba_backend
    raise ValueError(f"unknown backend {name!r}")
