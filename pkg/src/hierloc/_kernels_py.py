"""Pure-numpy kernels, bit-compatible with the compiled ``_kernels`` module."""

import math

import numpy as np


def prepare_rows(X):
    # Transposed float64 copy: reducing over axis 0 of a C-ordered array adds
    # rows one after another, reproducing the compiled loop's summation order.
    return np.ascontiguousarray(np.asarray(X, dtype=np.float32).T, dtype=np.float64)


def sq_dists(rows, q):
    q = np.asarray(q, dtype=np.float64)
    if q.shape[0] != rows.shape[0]:
        raise ValueError(f"query has dim {q.shape[0]}, map has dim {rows.shape[0]}")
    if rows.shape[1] == 0:
        return np.empty(0, dtype=np.float64)
    diff = rows - q[:, None]
    diff *= diff
    if rows.shape[1] == 1:
        # a single column is contiguous, so sum() would switch to pairwise order
        return np.cumsum(diff[:, 0])[-1:]
    return diff.sum(axis=0)


def orientation_boundaries(bins):
    """Unit vectors at the bin edges ``k*pi/bins``, ``k = 1..bins-1``.

    Both backends take these from ``math`` so the bin tests see the same bits.
    """
    return [(math.cos(k * math.pi / bins), math.sin(k * math.pi / bins)) for k in range(1, bins)]


def hog_cell_histograms(gray, cell, bins):
    gray = np.asarray(gray, dtype=np.float64)
    h, w = gray.shape
    ch, cw = h // cell, w // cell
    gx = np.roll(gray, -1, axis=1) - np.roll(gray, 1, axis=1)
    up = np.concatenate([gray[:1], gray[:-1]], axis=0)
    down = np.concatenate([gray[1:], gray[-1:]], axis=0)
    gy = down - up
    mag = np.sqrt(gx * gx + gy * gy)
    # edge direction is the gradient turned by +90 degrees, folded into [0, pi)
    u, v = -gy, gx.copy()
    flip = (v < 0) | ((v == 0) & (u < 0))
    u[flip] = -u[flip]
    v[flip] = -v[flip]
    b = np.zeros(gray.shape, dtype=np.int64)
    for c, s in orientation_boundaries(bins):
        b += (c * v - s * u) >= 0
    rows = (np.arange(h) // cell)[:, None]
    cols = (np.arange(w) // cell)[None, :]
    idx = (rows * cw + cols) * bins + b
    hist = np.bincount(idx.ravel(), weights=mag.ravel(), minlength=ch * cw * bins)
    return hist.reshape(ch, cw, bins)
