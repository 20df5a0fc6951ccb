"""Non-overlapping spatial max pooling over CxHxW tensors."""

import numpy as np

from . import USE_NUMBA, jit_or_fallback


def _max_pool_loops(values, n):
    """Window-max with explicit loops; the numba compilation target."""
    c, h, w = values.shape
    h_out = h // n
    w_out = w // n
    out = np.empty((c, h_out, w_out), dtype=values.dtype)
    for ch in range(c):
        for i in range(h_out):
            for j in range(w_out):
                m = values[ch, i * n, j * n]
                for di in range(n):
                    for dj in range(n):
                        v = values[ch, i * n + di, j * n + dj]
                        if v > m:
                            m = v
                out[ch, i, j] = m
    return out


def max_pool_numpy(values, n):
    """Vectorized path: trim to full windows, reshape, reduce."""
    c, h, w = values.shape
    h_out = h // n
    w_out = w // n
    trimmed = values[:, : h_out * n, : w_out * n]
    return trimmed.reshape(c, h_out, n, w_out, n).max(axis=(2, 4))


max_pool_numba = jit_or_fallback(_max_pool_loops) if USE_NUMBA else None


def max_pool_kernel(values, n):
    if max_pool_numba is not None:
        return max_pool_numba(values, n)
    return max_pool_numpy(values, n)
