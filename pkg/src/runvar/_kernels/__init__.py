"""Kernel backend selection.

The hot inner loops (histogram binning, k-means assignment, tree split
search, batch tree traversal) have two interchangeable implementations:
a numba @njit one and a pure-numpy fallback. Selection is controlled by
the RUNVAR_BACKEND environment variable:

    auto  (default) use numba when importable, else numpy
    numba           require numba, fail loudly if missing
    numpy           force the pure-numpy path

`benchmarks/bench_backends.py` compares the two directly.
"""

import os

from . import numpy_impl

_choice = os.environ.get("RUNVAR_BACKEND", "auto").strip().lower()

if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(f"RUNVAR_BACKEND must be auto|numba|numpy, got {_choice!r}")

if _choice == "numpy":
    _impl = numpy_impl
    BACKEND = "numpy"
elif _choice == "numba":
    from . import numba_impl as _impl

    BACKEND = "numba"
else:
    try:
        from . import numba_impl as _impl

        BACKEND = "numba"
    except ImportError:
        _impl = numpy_impl
        BACKEND = "numpy"

bin_counts = _impl.bin_counts
kmeans_assign = _impl.kmeans_assign
best_split_gini = _impl.best_split_gini
best_split_mse = _impl.best_split_mse
tree_apply = _impl.tree_apply

__all__ = [
    "BACKEND",
    "bin_counts",
    "kmeans_assign",
    "best_split_gini",
    "best_split_mse",
    "tree_apply",
]
