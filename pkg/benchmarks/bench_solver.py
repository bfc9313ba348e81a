#!/usr/bin/env python3
"""Benchmark the compiled solver kernel against the NumPy fallback.

Times raw iteration blocks (identical state, identical arithmetic) and full
certified solves on a clustered design representative of the experiment
workload, then prints a small table with the speedup.

Usage: python benchmarks/bench_solver.py [--n 200] [--p 2000] [--reps 5]
"""

import argparse
import time

import numpy as np

from clusterlasso import _solver_py
from clusterlasso import lasso as lasso_mod
from clusterlasso.lasso import solve
from clusterlasso.linalg import spectral_norm
from clusterlasso.mixture import (
    MixtureSpec,
    orthonormal_centers,
    rng_from_key,
    sample_design,
)
from clusterlasso.proxy import TruthRule, sample_ground_truth

try:
    from clusterlasso import _solver_kernel

    KERNELS = [("compiled", _solver_kernel), ("pure", _solver_py)]
except ImportError:
    KERNELS = [("pure", _solver_py)]


def make_problem(n, p, seed=5):
    k = max(8, n // 25)
    s_star = max(4, k // 5)
    spec = MixtureSpec(n=n, p=p, n_clusters=k, n_active=s_star, spread=1e-3)
    centers = orthonormal_centers(n, k, rng_from_key(seed, 0))
    inst = sample_design(spec, centers, rng_from_key(seed, 1))
    truth = sample_ground_truth(
        inst, s_star, TruthRule(value=2.0), 0.05, rng_from_key(seed, 2)
    )
    lam = 2.0 * 0.05 * np.sqrt(2.0 * np.log(p))
    return inst.design, truth.response, lam


def bench_blocks(kernel, x_mat, y, lam, lip, iters):
    n, p = x_mat.shape
    x = np.zeros(p)
    xp = x.copy()
    yv = x.copy()
    scratch = [np.empty(p), np.empty(p), np.empty(n), np.empty(n), np.empty(p)]
    fx = 0.5 * float(y @ y)
    start = time.perf_counter()
    kernel.run_block(
        x_mat, y, lam, iters, x, xp, yv, *scratch, 1.0, fx, lip, None, 0
    )
    return time.perf_counter() - start


def bench_solve(name, x_mat, y, lam, reps):
    times = []
    for _ in range(reps):
        start = time.perf_counter()
        solve(x_mat, y, lam, tol=1e-9)
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--p", type=int, default=2000)
    parser.add_argument("--reps", type=int, default=5)
    parser.add_argument("--iters", type=int, default=400)
    args = parser.parse_args()

    x_mat, y, lam = make_problem(args.n, args.p)
    x_mat = np.ascontiguousarray(x_mat)
    lip = spectral_norm(x_mat, tol=1e-6).operator_norm ** 2

    print(f"problem: n={args.n} p={args.p} lam={lam:.4f}")
    print(f"{'kernel':<10} {'block s':>12} {'iters/s':>12}")
    block_times = {}
    for name, kernel in KERNELS:
        best = min(
            bench_blocks(kernel, x_mat, y, lam, lip, args.iters)
            for _ in range(args.reps)
        )
        block_times[name] = best
        print(f"{name:<10} {best:>12.4f} {args.iters / best:>12.0f}")
    if len(block_times) == 2:
        print(
            f"block speedup: {block_times['pure'] / block_times['compiled']:.2f}x"
        )

    print(f"\n{'backend':<10} {'solve s':>12}")
    solve_times = {}
    for name, kernel in KERNELS:
        lasso_mod._kernel = kernel
        best = bench_solve(name, x_mat, y, lam, args.reps)
        solve_times[name] = best
        print(f"{name:<10} {best:>12.4f}")
    if len(solve_times) == 2:
        print(
            f"solve speedup: {solve_times['pure'] / solve_times['compiled']:.2f}x"
        )


if __name__ == "__main__":
    main()
