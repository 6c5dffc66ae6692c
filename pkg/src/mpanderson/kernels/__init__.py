"""Hot numeric loops, compiled with numba when available.

Set ``MPANDERSON_DISABLE_NUMBA=1`` to force the pure-numpy path.  Both paths
are kept importable as ``kernels.numpy_impl`` / ``kernels.numba_impl`` so
tests and benchmarks can compare them directly.
"""

import os

from . import _numpy as numpy_impl

NUMBA_DISABLED = os.environ.get("MPANDERSON_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    from . import _numba as numba_impl
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_impl = None
    NUMBA_AVAILABLE = False

USING_NUMBA = NUMBA_AVAILABLE and not NUMBA_DISABLED
_impl = numba_impl if USING_NUMBA else numpy_impl

sym_dist_rows = _impl.sym_dist_rows
potential_diagonal = _impl.potential_diagonal
cell_sq_norms = _impl.cell_sq_norms

__all__ = [
    "NUMBA_AVAILABLE",
    "USING_NUMBA",
    "cell_sq_norms",
    "numba_impl",
    "numpy_impl",
    "potential_diagonal",
    "sym_dist_rows",
]
