#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Imports both kernel modules directly (bypassing the env-flag selection) and
times identical workloads:  profile evaluation, the midpoint map, the
pointwise condition, and the distortion scan.  The numba timings exclude
compilation (one warmup call per kernel).

Run:  python3 benchmarks/bench_backends.py [n]
"""

import sys
import time

import numpy as np

from branchcd import _kernels_numpy
from branchcd.geometry import SpaceParams, build_profile

try:
    from branchcd import _kernels_numba
except ImportError:
    _kernels_numba = None


def make_workload(n, seed=0):
    params = SpaceParams(k=0.01, K=1.0, epsilon=0.001)
    profile = build_profile(params)
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(-1, 1, n)
    x1 = rng.uniform(-1, 1, n)
    y0 = rng.uniform(0, 1, n) * _kernels_numpy.eval_f(x0, profile.breaks,
                                                      profile.c0)
    y1 = rng.uniform(0, 1, n) * _kernels_numpy.eval_f(x1, profile.breaks,
                                                      profile.c0)
    a = rng.uniform(0.5, 2.0, n)
    b = rng.uniform(0.5, 2.0, n)
    return profile, x0, y0, x1, y1, a, b


def bench(fn, *args, repeats=5):
    fn(*args)                      # warmup (JIT compile on numba side)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 1_000_000
    profile, x0, y0, x1, y1, a, b = make_workload(n)
    br, c0, c1, c2 = profile.breaks, profile.c0, profile.c1, profile.c2

    cases = [
        ("eval_profile", lambda k: k.eval_profile(x0, br, c0, c1, c2)),
        ("midpoint", lambda k: k.midpoint(x0, y0, x1, y1, br, c0)),
        ("jacobi_condition",
         lambda k: k.jacobi_condition(x0, y0, x0 + 0.001, y1 * 0.9, a, b,
                                      1.0, br, c0)),
        ("mgh_distortion",
         lambda k: k.mgh_distortion(x0, y0, x1, y1, 0.001, br, c0)),
    ]

    print(f"n = {n}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}"
          f"{'speedup':>10}")
    for name, call in cases:
        t_np = bench(call, _kernels_numpy) * 1e3
        if _kernels_numba is None:
            print(f"{name:<18}{t_np:>12.2f}{'n/a':>12}{'n/a':>10}")
            continue
        t_nb = bench(call, _kernels_numba) * 1e3
        print(f"{name:<18}{t_np:>12.2f}{t_nb:>12.2f}"
              f"{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
