"""Kernel backend selection.

The hot kernels exist twice: a numba-jitted module and a pure-numpy module
with identical signatures.  ``BRANCHCD_BACKEND`` picks one:

    BRANCHCD_BACKEND=numpy  -> force the pure-numpy path
    BRANCHCD_BACKEND=numba  -> require numba (ImportError if unavailable)
    unset                   -> numba when importable, numpy otherwise

The choice is made once at import time; ``benchmarks/bench_backends.py``
compares the two.
"""

import os
import warnings

_requested = os.environ.get("BRANCHCD_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(f"BRANCHCD_BACKEND must be 'numba' or 'numpy', "
                       f"got {_requested!r}")

if _requested == "numpy":
    from . import _kernels_numpy as kernels
elif _requested == "numba":
    from . import _kernels_numba as kernels
else:
    try:
        from . import _kernels_numba as kernels
    except ImportError:  # pragma: no cover
        warnings.warn("numba unavailable, falling back to numpy kernels")
        from . import _kernels_numpy as kernels

BACKEND = kernels.BACKEND_NAME


def get_kernels():
    """The active kernel module."""
    return kernels
