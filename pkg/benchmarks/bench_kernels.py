"""Benchmark the numba-accelerated kernels against the pure-numpy fallbacks.

Run:  python3 benchmarks/bench_kernels.py
"""

import argparse
import time

import numpy as np

from sila.kernels import _mhd_numba, _mhd_numpy, _nn_cd_numba, _nn_cd_numpy


def bench(fn, args, repeats):
    fn(*args)  # warm-up (triggers JIT compilation for the numba variants)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    print(f"{'kernel':<28}{'size':<16}{'numpy (ms)':>12}{'numba (ms)':>12}{'speedup':>9}")
    for n in (50, 200, 800):
        a = np.ascontiguousarray(rng.normal(size=(n, 2)))
        b = np.ascontiguousarray(rng.normal(size=(n, 2)))
        t_np = bench(_mhd_numpy, (a, b), args.repeats)
        t_nb = bench(_mhd_numba, (a, b), args.repeats)
        print(f"{'mhd_points':<28}{f'{n}x{n}':<16}{t_np*1e3:>12.3f}{t_nb*1e3:>12.3f}"
              f"{t_np/t_nb:>9.1f}x")

    for L in (10, 40, 120):
        D = rng.normal(size=(400, L))
        y = rng.normal(size=400)
        G, bb = D.T @ D, D.T @ y
        mk = lambda: (G.copy(), bb.copy(), 0.1, np.zeros(L), 100, 1e-10)
        t_np = bench(lambda *x: _nn_cd_numpy(*mk()), (), args.repeats)
        t_nb = bench(lambda *x: _nn_cd_numba(*mk()), (), args.repeats)
        print(f"{'nn_coordinate_descent':<28}{f'L={L}':<16}{t_np*1e3:>12.3f}"
              f"{t_nb*1e3:>12.3f}{t_np/t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
