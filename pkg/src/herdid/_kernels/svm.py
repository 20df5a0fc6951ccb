"""Dual coordinate descent for the L1-hinge binary SVM (liblinear-style).

One binary problem per call: labels in {-1, +1}, per-sample box bounds,
bias handled by the caller through an appended constant feature. The sweep
order is reshuffled every epoch with a 32-bit LCG so the numba and plain
paths walk identical permutations.
"""

import numpy as np

from . import USE_NUMBA, jit_or_fallback

_LCG_MASK = 0xFFFFFFFF


GAP_RTOL = 5e-3


def _dual_cd_sweeps(x, t, upper, qii, tol, max_epochs, seed):
    """Run epochs of coordinate updates; returns (w, alpha, epochs, max_viol).

    Termination: the maximal projected-gradient violation drops below
    ``tol`` and the relative duality gap below ``GAP_RTOL``, or
    ``max_epochs`` epochs elapse. Violations recorded during an update sweep
    are stale (w keeps moving), so a candidate stop triggers a
    measurement-only pass at the current iterate that re-checks the
    violations and evaluates both objectives; the sweep resumes if either
    condition fails there.
    """
    n, d = x.shape
    w = np.zeros(d, dtype=np.float64)
    alpha = np.zeros(n, dtype=np.float64)
    order = np.arange(n)
    state = (seed * 747796405 + 2891336453) & _LCG_MASK
    max_viol = np.inf
    epochs = 0
    for _ in range(max_epochs):
        epochs += 1
        for i in range(n - 1, 0, -1):
            state = (state * 1664525 + 1013904223) & _LCG_MASK
            j = state % (i + 1)
            tmp = order[i]
            order[i] = order[j]
            order[j] = tmp
        sweep_viol = 0.0
        updates = 0
        for k in range(n):
            idx = order[k]
            row = x[idx]
            g = t[idx] * np.dot(w, row) - 1.0
            a = alpha[idx]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= upper[idx]:
                pg = max(g, 0.0)
            else:
                pg = g
            v = abs(pg)
            if v > sweep_viol:
                sweep_viol = v
            if v > 1e-12:
                new_a = a - g / qii[idx]
                if new_a < 0.0:
                    new_a = 0.0
                elif new_a > upper[idx]:
                    new_a = upper[idx]
                delta = (new_a - a) * t[idx]
                if delta != 0.0:
                    w += delta * row
                    alpha[idx] = new_a
                    updates += 1
        max_viol = sweep_viol
        if updates == 0:
            # Numerical fixed point: no sweep order can move the iterate now.
            break
        if sweep_viol < tol:
            fresh_viol = 0.0
            hinge_sum = 0.0
            for idx in range(n):
                g = t[idx] * np.dot(w, x[idx]) - 1.0
                a = alpha[idx]
                if a <= 0.0:
                    pg = min(g, 0.0)
                elif a >= upper[idx]:
                    pg = max(g, 0.0)
                else:
                    pg = g
                v = abs(pg)
                if v > fresh_viol:
                    fresh_viol = v
                if g < 0.0:
                    hinge_sum += upper[idx] * (-g)
            max_viol = fresh_viol
            w_norm = 0.5 * np.dot(w, w)
            primal = w_norm + hinge_sum
            dual = alpha.sum() - w_norm
            if fresh_viol < tol and primal - dual <= GAP_RTOL * abs(primal):
                break
    return w, alpha, epochs, max_viol


dual_cd_numba = jit_or_fallback(_dual_cd_sweeps) if USE_NUMBA else None
dual_cd_numpy = _dual_cd_sweeps


def dual_cd_kernel(x, t, upper, qii, tol, max_epochs, seed):
    if dual_cd_numba is not None:
        return dual_cd_numba(x, t, upper, qii, tol, max_epochs, seed)
    return dual_cd_numpy(x, t, upper, qii, tol, max_epochs, seed)
