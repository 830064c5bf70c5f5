#!/usr/bin/env python3
"""Benchmark the compiled hot kernels against the pure-numpy fallback.

Run after `pip install -e . --no-build-isolation`:

    python3 benchmarks/bench_kernels.py

The fractional-path convolution is O(N^2) in the step count, so this is the
loop that dominates long single-path runs.
"""

from __future__ import annotations

import time

import numpy as np

from franneal._kernels import BACKEND, _fallback

try:
    from franneal._kernels import _core
except ImportError:
    _core = None


def timeit(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    print(f"active backend: {BACKEND}")
    rng = np.random.default_rng(0)
    impls = [("fallback", _fallback)] + ([("compiled", _core)] if _core else [])

    print("\ncausal_convolve (fractional path kernel)")
    print(f"{'N':>8} " + " ".join(f"{name:>12}" for name, _ in impls))
    for exp in range(10, 15):
        n = 2**exp
        kernel = (np.arange(1, n + 1) / n) ** -0.2
        x = rng.standard_normal(n)
        times = [timeit(impl.causal_convolve, kernel, x) for _, impl in impls]
        print(f"{n:>8} " + " ".join(f"{t * 1e3:>10.2f}ms" for t in times))

    print("\nlinear_recursion (2x2 one-step propagation)")
    print(f"{'N':>8} " + " ".join(f"{name:>12}" for name, _ in impls))
    E = np.array([[0.99, 0.001], [0.002, 0.98]])
    for exp in range(10, 15):
        n = 2**exp
        db = rng.standard_normal((n, 2))
        times = [timeit(impl.linear_recursion, E, db, 1.0) for _, impl in impls]
        print(f"{n:>8} " + " ".join(f"{t * 1e3:>10.2f}ms" for t in times))


if __name__ == "__main__":
    main()
