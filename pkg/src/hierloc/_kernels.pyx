# cython: language_level=3
"""Compiled inner loops. Semantics mirror ``_kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

from hierloc._kernels_py import orientation_boundaries

cnp.import_array()


def prepare_rows(X):
    """Return the search layout for a descriptor matrix (float32, C order)."""
    return np.ascontiguousarray(X, dtype=np.float32)


def sq_dists(const float[:, ::1] rows, const double[::1] q):
    """Squared Euclidean distance from ``q`` to every row, double accumulation.

    Components are accumulated in index order so the result matches the
    pure-Python backend bit for bit.
    """
    cdef Py_ssize_t n = rows.shape[0]
    cdef Py_ssize_t m = rows.shape[1]
    if q.shape[0] != m:
        raise ValueError(f"query has dim {q.shape[0]}, map has dim {m}")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j
    cdef double acc, t
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(m):
                t = <double>rows[i, j] - q[j]
                acc = acc + t * t
            o[i] = acc
    return out


def hog_cell_histograms(const double[:, ::1] gray, int cell, int bins):
    """Per-cell histograms of edge orientation weighted by gradient magnitude.

    Horizontal gradients wrap around the panorama seam; vertical ones
    replicate the border row. A pixel's bin counts the bin edges its edge
    direction lies on or past, tested by the sign of a cross product.
    """
    cdef Py_ssize_t h = gray.shape[0]
    cdef Py_ssize_t w = gray.shape[1]
    cdef Py_ssize_t ch = h // cell
    cdef Py_ssize_t cw = w // cell
    hist = np.zeros((ch, cw, bins), dtype=np.float64)
    cdef double[:, :, ::1] hv = hist
    edges = np.array(orientation_boundaries(bins), dtype=np.float64).reshape(-1, 2)
    cdef const double[:, ::1] ev = edges
    cdef Py_ssize_t ne = ev.shape[0]
    cdef Py_ssize_t y, x, xl, xr, yu, yd, b, k
    cdef double gx, gy, mag, u, v
    with nogil:
        for y in range(h):
            yu = y - 1 if y > 0 else 0
            yd = y + 1 if y < h - 1 else h - 1
            for x in range(w):
                xl = x - 1 if x > 0 else w - 1
                xr = x + 1 if x < w - 1 else 0
                gx = gray[y, xr] - gray[y, xl]
                gy = gray[yd, x] - gray[yu, x]
                mag = sqrt(gx * gx + gy * gy)
                u = -gy
                v = gx
                if v < 0.0 or (v == 0.0 and u < 0.0):
                    u = -u
                    v = -v
                b = 0
                for k in range(ne):
                    if ev[k, 0] * v - ev[k, 1] * u >= 0.0:
                        b += 1
                hv[y // cell, x // cell, b] += mag
    return hist
