"""Time the numba kernels against the numpy fallbacks on representative inputs.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from mpanderson.geometry import CubeSpec
from mpanderson.kernels import numba_impl, numpy_impl
from mpanderson.operators import GridSpec
from mpanderson.randomfield import sample_disorder


def best_of(fn, repeat):
    fn()  # compile / warm caches
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    X = rng.integers(-20, 20, (200_000, 3, 1)).astype(float)
    Y = rng.integers(-20, 20, (200_000, 3, 1)).astype(float)
    yield "sym_dist_rows N=3, 2e5 rows", lambda m: m.sym_dist_rows(X, Y)

    grid = GridSpec(CubeSpec.around([0, 0], 12), 0.5)
    q = grid.nodes.reshape(-1, 2, 1)
    dis = sample_disorder(CubeSpec.around([0, 0], 13), 0, 0)
    lo, amps = dis.box()
    yield (f"potential_diagonal dim={grid.dim}",
           lambda m: m.potential_diagonal(q, grid.M, lo, amps, 1, 8.0, 1.0, 0.5, np.inf))

    V = rng.standard_normal((grid.dim, 64))
    yield (f"cell_sq_norms {grid.dim}x64",
           lambda m: m.cell_sq_norms(V, grid.cell_ids, grid.n_cells))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':<38} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8}")
    for name, fn in cases():
        a = best_of(lambda: fn(numpy_impl), args.repeat)
        b = best_of(lambda: fn(numba_impl), args.repeat)
        print(f"{name:<38} {a:10.4f} {b:10.4f} {a / b:8.1f}")


if __name__ == "__main__":
    main()
