"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs both implementations regardless of the COVGLM_NUMBA flag and prints a
small table with per-call timings and the speedup. The pairwise-trace
kernel is sized like a mid-sized multivariate fit (q dispersion matrices of
an NR x NR system); the incomplete-gamma timing sweeps a p-value grid.

Usage: python benchmarks/bench_kernels.py [--n 600] [--q 6] [--repeat 20]
"""

import argparse
import time

import numpy as np

from covglm._kernels import (
    _pair_traces_loops,
    gammainc_upper_python,
    pair_traces_numpy,
)

try:
    from numba import njit
except ImportError:
    njit = None


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_pair_traces(n, q, repeat):
    rng = np.random.default_rng(0)
    mats = np.ascontiguousarray(rng.normal(size=(q, n, n)))
    rows = []
    t_numpy = _time(lambda: pair_traces_numpy(mats), repeat)
    rows.append(("pair_traces", "numpy", t_numpy))
    if njit is not None:
        compiled = njit(cache=True)(_pair_traces_loops)
        compiled(mats)  # compile outside the timing
        reference = pair_traces_numpy(mats)
        assert np.allclose(compiled(mats), reference, atol=1e-8)
        t_numba = _time(lambda: compiled(mats), repeat)
        rows.append(("pair_traces", "numba", t_numba))
    return rows


def bench_gammainc(repeat):
    grid = [(df / 2.0, w / 2.0) for df in range(1, 40) for w in np.linspace(0.01, 80, 120)]

    def run_python():
        for a, x in grid:
            gammainc_upper_python(a, x)

    rows = [("gammainc_upper", "python", _time(run_python, repeat))]
    if njit is not None:
        compiled = njit(cache=True)(gammainc_upper_python)
        compiled(0.5, 1.0)

        def run_numba():
            for a, x in grid:
                compiled(a, x)

        rows.append(("gammainc_upper", "numba", _time(run_numba, repeat)))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=600, help="matrix dimension")
    parser.add_argument("--q", type=int, default=6, help="number of matrices")
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    rows = bench_pair_traces(args.n, args.q, args.repeat)
    rows += bench_gammainc(max(3, args.repeat // 4))

    print(f"{'kernel':<16} {'path':<8} {'best (ms)':>12}")
    by_kernel = {}
    for kernel, path, seconds in rows:
        print(f"{kernel:<16} {path:<8} {seconds * 1e3:>12.3f}")
        by_kernel.setdefault(kernel, {})[path] = seconds
    for kernel, paths in by_kernel.items():
        if len(paths) == 2:
            slow, fast = max(paths.values()), min(paths.values())
            winner = min(paths, key=paths.get)
            print(f"{kernel}: {winner} is {slow / fast:.1f}x faster")


if __name__ == "__main__":
    main()
