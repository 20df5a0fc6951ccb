#!/usr/bin/env python3
"""Benchmark the JIT kernels against their pure-NumPy/Python fallbacks.

Runs max pooling at real activation-tensor geometry and the dual coordinate
descent solver at gallery-training scale, timing both dispatch paths in one
process. Usage: python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from herdid._kernels import HAVE_NUMBA, USE_NUMBA
from herdid._kernels.pooling import _max_pool_loops, max_pool_numba, max_pool_numpy
from herdid._kernels.svm import dual_cd_numpy, dual_cd_numba


def timeit(fn, *args, repeat=5):
    best = float("inf")
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def bench_pooling(rows):
    rng = np.random.default_rng(0)
    # activation_40 geometry at 512 px input: 1024 x 32 x 32 per image.
    tensor = rng.normal(size=(1024, 32, 32))
    n = 6
    t_numpy, out_numpy = timeit(max_pool_numpy, tensor, n)
    rows.append(("max_pool 1024x32x32 n=6", "numpy", t_numpy, 1.0))
    if max_pool_numba is not None:
        max_pool_numba(tensor[:2], n)  # compile outside the timed region
        t_jit, out_jit = timeit(max_pool_numba, tensor, n)
        assert np.array_equal(out_numpy, out_jit)
        rows.append(("max_pool 1024x32x32 n=6", "numba", t_jit, t_numpy / t_jit))
    t_loops, _ = timeit(_max_pool_loops, tensor[:64], n, repeat=2)
    rows.append(("max_pool 64x32x32 n=6", "python loops", t_loops, None))


def bench_dual_cd(rows):
    rng = np.random.default_rng(1)
    n_samples, dim = 400, 200
    x = rng.normal(size=(n_samples, dim))
    x[: n_samples // 2, 0] += 2.5
    aug = np.ascontiguousarray(np.hstack([x, np.ones((n_samples, 1))]))
    t = np.where(np.arange(n_samples) < n_samples // 2, 1.0, -1.0)
    upper = np.full(n_samples, 1.0)
    qii = np.einsum("ij,ij->i", aug, aug)
    args = (aug, t, upper, qii, 1e-3, 1000, 7)

    t_py, out_py = timeit(dual_cd_numpy, *args, repeat=2)
    rows.append((f"dual_cd {n_samples}x{dim}", "numpy", t_py, 1.0))
    if dual_cd_numba is not None:
        dual_cd_numba(aug[:8], t[:8], upper[:8], qii[:8], 1e-3, 5, 7)
        t_jit, out_jit = timeit(dual_cd_numba, *args, repeat=3)
        assert np.allclose(out_py[0], out_jit[0], atol=1e-10)
        rows.append((f"dual_cd {n_samples}x{dim}", "numba", t_jit, t_py / t_jit))


def main():
    print(f"numba available: {HAVE_NUMBA}; active path: "
          f"{'numba' if USE_NUMBA else 'numpy'} (HERDID_NUMBA)")
    rows = []
    bench_pooling(rows)
    bench_dual_cd(rows)
    print(f"\n{'kernel':<28} {'path':<14} {'best time':>12} {'speedup':>9}")
    for name, path, seconds, speedup in rows:
        tag = f"{speedup:8.1f}x" if speedup else "        -"
        print(f"{name:<28} {path:<14} {seconds * 1e3:>10.2f}ms {tag}")


if __name__ == "__main__":
    main()
