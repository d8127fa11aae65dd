#!/usr/bin/env python3
"""Timing comparison of the compiled and pure-python kernels.

Runs the per-pipe box residual/Jacobian evaluation and the stochastic
substepping on representative sizes and prints the speedup.  Usage:

    python benchmarks/bench_kernels.py [--cells N] [--substeps N] [--repeat N]
"""

import argparse
import time

import numpy as np

from gaspower import _pykernels, gas, kernels
from gaspower.network import Pipeline


def timeit(fun, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fun()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--cells", type=int, default=256)
    parser.add_argument("--substeps", type=int, default=20000)
    parser.add_argument("--repeat", type=int, default=50)
    args = parser.parse_args()

    constants = gas.GasConstants()
    pipe = Pipeline.from_geometry("bench", "a", "b", 1000.0 * args.cells, 0.8,
                                  1e-4, 1000.0)
    rng = np.random.default_rng(0)
    n = pipe.n_cells + 1
    rho_p = 40 + rng.uniform(-5, 5, n)
    q_p = 100 + rng.uniform(-30, 30, n)
    rho_n = 40 + rng.uniform(-5, 5, n)
    q_n = 100 + rng.uniform(-30, 30, n)

    mu = np.linspace(1.0, 1.2, args.substeps + 1)
    xi = rng.standard_normal(args.substeps)

    cases = [
        ("box residual",
         lambda k: k.box_residual(rho_p, q_p, rho_n, q_n, 1800.0, pipe,
                                  constants)),
        ("box jacobian",
         lambda k: k.box_jacobian(rho_n, q_n, 1800.0, pipe, constants)),
        ("em span",
         lambda k: k.em_span(1.0, mu, 3.0, 0.45, 1e-3, xi, 0.4, True)),
    ]

    print(f"selected backend: {kernels.BACKEND}")
    print(f"{'kernel':<14} {'python':>12} {'compiled':>12} {'speedup':>9}")
    for name, call in cases:
        t_py = timeit(lambda: call(_pykernels), args.repeat)
        if kernels.BACKEND == "compiled":
            t_c = timeit(lambda: call(kernels), args.repeat)
            print(f"{name:<14} {t_py * 1e6:>10.1f}us {t_c * 1e6:>10.1f}us "
                  f"{t_py / t_c:>8.1f}x")
        else:
            print(f"{name:<14} {t_py * 1e6:>10.1f}us {'n/a':>12} {'':>9}")


if __name__ == "__main__":
    main()
