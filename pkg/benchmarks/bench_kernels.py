"""Timing comparison of the compiled and pure-numpy particle kernels.

Run as: python benchmarks/bench_kernels.py [n_particles]
"""
import sys
import time

import numpy as np

from svpfp.kernels import get_backend


def bench(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    rng = np.random.default_rng(0)
    length = 2.0 * np.pi
    n_cells = 64

    pure = get_backend("pure")
    try:
        comp = get_backend("cython")
    except ImportError:
        print("compiled backend unavailable; benchmarking pure only")
        comp = None

    print(f"{n} particles, {n_cells} cells per axis")
    for d in (1, 2, 3):
        pos = rng.uniform(0.0, length, size=(n, d))
        w = rng.uniform(0.5, 1.5, size=n)
        field_shape = (n_cells,) * d + (d,)
        field = rng.standard_normal(field_shape)

        t_pure = bench(pure.deposit_cic, pos, w, n_cells, length)
        row = f"d={d} deposit: pure {t_pure * 1e3:8.2f} ms"
        if comp is not None:
            t_comp = bench(comp.deposit_cic, pos, w, n_cells, length)
            a = pure.deposit_cic(pos, w, n_cells, length)
            b = comp.deposit_cic(pos, w, n_cells, length)
            match = "exact" if np.array_equal(a, b) else f"maxdiff {np.max(np.abs(a - b)):.2e}"
            row += f"  cython {t_comp * 1e3:8.2f} ms  speedup {t_pure / t_comp:5.1f}x  ({match})"
        print(row)

        t_pure = bench(pure.gather_linear, field, pos, length)
        row = f"d={d} gather:  pure {t_pure * 1e3:8.2f} ms"
        if comp is not None:
            t_comp = bench(comp.gather_linear, field, pos, length)
            a = pure.gather_linear(field, pos, length)
            b = comp.gather_linear(field, pos, length)
            match = "exact" if np.array_equal(a, b) else f"maxdiff {np.max(np.abs(a - b)):.2e}"
            row += f"  cython {t_comp * 1e3:8.2f} ms  speedup {t_pure / t_comp:5.1f}x  ({match})"
        print(row)


if __name__ == "__main__":
    main()
