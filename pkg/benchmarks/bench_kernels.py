"""Benchmark: compiled orbit kernel vs the pure-Python twin.

Usage: python benchmarks/bench_kernels.py [--steps N] [--orbits K]
"""

import argparse
import time

import numpy as np

from petallab import kernels
from petallab.germs import corner_germ


def bench(backend, cx, cy, starts, steps):
    xs = np.empty(steps + 1, complex)
    ys = np.empty(steps + 1, complex)
    t0 = time.perf_counter()
    total = 0
    for x0, y0 in starts:
        n, _ = backend.run_orbit(cx, cy, x0, y0, steps, 1e24, 1e-30, xs, ys)
        total += n
    dt = time.perf_counter() - t0
    return total / dt, dt


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--orbits", type=int, default=8)
    args = ap.parse_args()

    F = corner_germ(1, 1, -0.5, -0.5)
    cx, cy = F.dense_coeffs()
    rng = np.random.default_rng(1)
    starts = [(complex(0.02 + 0.04 * rng.random(), 0.01 * rng.random()),
               complex(0.02 + 0.04 * rng.random(), 0.01 * rng.random()))
              for _ in range(args.orbits)]

    rows = []
    pure = kernels.get_backend("pure")
    # keep the pure run short enough to be polite
    psteps = min(args.steps, 20_000)
    rate_p, dt_p = bench(pure, cx, cy, starts, psteps)
    rows.append(("pure", psteps, dt_p, rate_p))
    try:
        core = kernels.get_backend("compiled")
    except ImportError:
        core = None
    if core is not None:
        rate_c, dt_c = bench(core, cx, cy, starts, args.steps)
        rows.append(("compiled", args.steps, dt_c, rate_c))

    print(f"{'backend':<10}{'steps/orbit':>12}{'time [s]':>10}{'steps/s':>14}")
    for name, steps, dt, rate in rows:
        print(f"{name:<10}{steps:>12}{dt:>10.3f}{rate:>14.3e}")
    if core is not None:
        print(f"speedup (compiled / pure): {rows[1][3] / rows[0][3]:.1f}x")
    else:
        print("compiled kernel not built; only the pure backend was timed")


if __name__ == "__main__":
    main()
