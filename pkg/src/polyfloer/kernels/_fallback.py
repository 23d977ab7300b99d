"""Pure numpy implementations of the hot kernels.

These are the reference implementations; the compiled core in ``_core`` must
agree with them to rounding error.
"""
import numpy as np


def batched_matvec(blocks, vecs):
    """``out[n] = blocks[n] @ vecs[n]`` for complex blocks of shape (n, d, d)."""
    blocks = np.ascontiguousarray(blocks, dtype=np.complex128)
    vecs = np.ascontiguousarray(vecs, dtype=np.complex128)
    return np.einsum("nij,nj->ni", blocks, vecs)


def bump_profile(y, r, period):
    """Smooth bump ``exp(1 - r^2 / (r^2 - y^2))`` with ``y`` wrapped to (-P/2, P/2]."""
    y = np.asarray(y, dtype=np.float64)
    half = 0.5 * period
    w = half - np.mod(half - y, period)
    out = np.zeros_like(w)
    inside = np.abs(w) < r
    wi = w[inside]
    out[inside] = np.exp(1.0 - r * r / (r * r - wi * wi))
    return out


def gap_sweep(R, kmax, mlimit):
    """Minimise ``|R m - sqrt(1 + k^2)| (1 + k^2)^2`` over ``0 <= k <= kmax``.

    ``mlimit[k]`` is the largest |m| visited for that k. Returns
    ``(value, m, k)`` of the first minimiser in (k, m) order.
    """
    mlimit = np.asarray(mlimit, dtype=np.int64)
    best = (np.inf, 0, 0)
    for k in range(int(kmax) + 1):
        m = np.arange(int(mlimit[k]) + 1, dtype=np.float64)
        w = 1.0 + float(k) * float(k)
        vals = np.abs(R * m - np.sqrt(w)) * (w * w)
        j = int(np.argmin(vals))
        if vals[j] < best[0]:
            best = (float(vals[j]), j, k)
    return best
