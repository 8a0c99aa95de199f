"""Backend selection for the hot loops.

The compiled extension is used when it was built; set ``HLOC_PURE_PYTHON=1``
to force the numpy implementation. Both backends return identical bits.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("HLOC_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or None=active)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def prepare_rows(X):
    return _impl.prepare_rows(X)


def sq_dists(rows, q):
    return _impl.sq_dists(rows, q)


def hog_cell_histograms(gray, cell, bins):
    return _impl.hog_cell_histograms(gray, int(cell), int(bins))
