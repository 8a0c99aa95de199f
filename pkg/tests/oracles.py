"""Independent reference implementations used as test oracles."""

import math

import numpy as np


def numeric_grad(f, theta, h=1e-4):
    """Central finite differences of scalar ``f`` at array ``theta``."""
    g = np.zeros_like(theta)
    for i in np.ndindex(theta.shape):
        orig = theta[i]
        theta[i] = orig + h
        up = f()
        theta[i] = orig - h
        down = f()
        theta[i] = orig
        g[i] = (up - down) / (2 * h)
    return g


def rel_error(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-8)))


def cross_entropy_scalar(W, b, X, labels):
    """Plain-Python softmax cross-entropy, one sample at a time."""
    total = 0.0
    for x, y in zip(X.tolist(), labels):
        z = [sum(wi * xi for wi, xi in zip(row, x)) + bi for row, bi in zip(W.tolist(), b.tolist())]
        top = max(z)
        lse = top + math.log(sum(math.exp(v - top) for v in z))
        total += lse - z[y]
    return total / len(labels)


def brute_nn(query, entries):
    """(index, distance) of the nearest entry; the first one wins a tie."""
    q = [float(v) for v in np.asarray(query, np.float32)]
    best, best_d = -1, math.inf
    for j, e in enumerate(entries):
        d = math.sqrt(sum((float(a) - b) ** 2 for a, b in zip(np.asarray(e, np.float32), q)))
        if d < best_d:
            best, best_d = j, d
    return best, best_d


def quartiles_by_sort(values):
    """Linear-interpolation quartiles from a sorted copy."""
    s = sorted(values)
    n = len(s)

    def q(p):
        pos = p * (n - 1)
        lo = math.floor(pos)
        hi = min(lo + 1, n - 1)
        return s[lo] + (s[hi] - s[lo]) * (pos - lo)

    return q(0.25), q(0.5), q(0.75)
