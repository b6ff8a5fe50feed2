"""Finite-difference differentiation matrices on arbitrary 1D grids.

Weights come from Fornberg's recursion, so the same code serves uniform
grids, stretched grids and one-sided boundary stencils.
"""

import numpy as np
import scipy.sparse as sp

_CACHE = {}


def fornberg_weights(z, x, m):
    """Weights for derivatives 0..m at ``z`` using nodes ``x``.

    Returns an array ``c`` of shape ``(m + 1, len(x))`` such that
    ``c[k] @ f(x)`` approximates the k-th derivative of f at z.
    """
    x = np.asarray(x, dtype=float)
    n = len(x) - 1
    c = np.zeros((m + 1, n + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n + 1):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def diff_matrix(x, order, width=7):
    """Sparse matrix applying the ``order``-th derivative on grid ``x``.

    Stencils have ``width`` points, centred where possible and shifted
    inwards near the ends.
    """
    x = np.ascontiguousarray(x, dtype=float)
    n = len(x)
    if n < width:
        raise ValueError(f"grid of {n} points is shorter than stencil width {width}")
    key = (x.tobytes(), order, width)
    hit = _CACHE.get(key)
    if hit is not None:
        return hit
    half = width // 2
    step = (x[-1] - x[0]) / (n - 1)
    uniform = np.max(np.abs(np.diff(x) - step)) <= 1e-9 * step
    rows, cols, vals = [], [], []
    for i in range(n):
        lo = min(max(i - half, 0), n - width)
        idx = np.arange(lo, lo + width)
        if uniform:
            # integer offsets: weights are exact rationals up to one rounding
            w = fornberg_weights(float(i - lo), np.arange(width, dtype=float),
                                 order)[order] / step ** order
        else:
            w = fornberg_weights(x[i], x[idx], order)[order]
        rows.extend([i] * width)
        cols.extend(idx)
        vals.extend(w)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    if len(_CACHE) > 64:
        _CACHE.clear()
    _CACHE[key] = mat
    return mat


def derivative(y, x, order=1, width=7):
    return diff_matrix(x, order, width) @ np.asarray(y, dtype=float)
