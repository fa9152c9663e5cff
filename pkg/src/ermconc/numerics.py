"""Small shared numerical kernels."""

from __future__ import annotations

import math

import numpy as np

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def golden_min(fun, lo, hi, iters=90, tol=1e-13):
    """Vectorized golden-section search; ``fun`` maps an array of abscissae to values."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    x1 = hi - _GOLD * (hi - lo)
    x2 = lo + _GOLD * (hi - lo)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(iters):
        left = f1 <= f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        new = np.where(left, hi - _GOLD * (hi - lo), lo + _GOLD * (hi - lo))
        fnew = fun(new)
        x1, x2, f1, f2 = (np.where(left, new, x2), np.where(left, x1, new),
                          np.where(left, fnew, f2), np.where(left, f1, fnew))
        if np.all(hi - lo < tol * np.maximum(1.0, np.abs(lo) + np.abs(hi))):
            break
    x = 0.5 * (lo + hi)
    return x, fun(x)
