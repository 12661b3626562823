"""Sequence acceleration used by truncation ladders and epsilon ladders."""
from __future__ import annotations

import numpy as np


def wynn_epsilon(seq, max_columns=6):
    """Limit of ``seq`` by Wynn's epsilon algorithm.

    Exact for sums of geometric sequences, so it handles both exponential
    decay in the truncation length and algebraic decay on a geometric
    ladder.  Returns ``(value, error)``: among the last entries of the even
    columns the one whose change from its predecessor is smallest.
    """
    s = np.asarray(seq, dtype=complex)
    if s.size < 2:
        raise ValueError("need at least two terms")
    best = (s[-1], abs(s[-1] - s[-2]))
    prev = np.zeros(s.size + 1, dtype=complex)     # column k-1
    cur = s.copy()                             # column k
    k = 0
    while cur.size >= 2 and k < 2 * max_columns:
        diff = np.diff(cur)
        if np.any(diff == 0):
            break
        nxt = prev[1:cur.size] + 1.0 / diff
        prev, cur = cur, nxt
        k += 1
        if k % 2 == 0 and cur.size >= 2:
            err = abs(cur[-1] - cur[-2])
            if np.isfinite(err) and err < best[1]:
                best = (cur[-1], err)
    return complex(best[0]), float(best[1])


def _neville_zero(h, v):
    p = list(v)
    n = len(h)
    for k in range(1, n):
        for i in range(n - k):
            p[i] = (h[i + k] * p[i] - h[i] * p[i + 1]) / (h[i + k] - h[i])
    return p[0]


def poly_extrapolate_zero(h, values):
    """Value at ``h = 0`` of the interpolating polynomial through ``(h_i, values_i)``.

    ``values`` may carry trailing axes.  The error estimate is the change
    when the point with the largest ``|h|`` is dropped.
    """
    h = np.asarray(h, dtype=float)
    v = np.asarray(values)
    if h.size < 2:
        raise ValueError("need at least two ladder values")
    order = np.argsort(-np.abs(h))
    h, v = h[order], v[order]
    full = _neville_zero(h, v)
    reduced = _neville_zero(h[1:], v[1:]) if h.size > 2 else v[-1]
    return full, np.abs(full - reduced)


def ladder_limit(t, values, max_columns=6, poly_points=6):
    """Limit of ``values`` as the ladder coordinate ``t`` tends to 0.

    Combines Wynn's epsilon algorithm with polynomial extrapolation in ``t``
    over the last ``poly_points`` entries when ``t`` is finite, keeping the
    estimate with the smaller error.
    """
    best = wynn_epsilon(values, max_columns)
    t = np.asarray(t, dtype=float)
    if np.all(np.isfinite(t)) and t.size >= 3:
        k = min(poly_points, t.size)
        v, e = poly_extrapolate_zero(t[-k:], np.asarray(values)[-k:])
        if float(e) < best[1]:
            best = (complex(v), float(e))
    return best
