"""Benchmark the whale optimizer on standard continuous test functions."""

import argparse
import time

import numpy as np

from batcap.woa import WoaConfig, uniform_bounds, woa_optimize


def sphere(x):
    return float(np.sum(x * x))


def rosenbrock(x):
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def rastrigin(x):
    return float(10.0 * len(x) + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x)))


BENCHMARKS = {
    "sphere": (sphere, (-10.0, 10.0)),
    "rosenbrock": (rosenbrock, (-5.0, 10.0)),
    "rastrigin": (rastrigin, (-5.12, 5.12)),
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, default=10)
    parser.add_argument("--pop", type=int, default=30)
    parser.add_argument("--iters", type=int, default=500)
    parser.add_argument("--seeds", type=int, default=5)
    args = parser.parse_args()

    print(f"{'function':<12} {'seed':>4} {'best cost':>12} {'secs':>6}")
    for name, (func, (lo, hi)) in BENCHMARKS.items():
        costs = []
        for seed in range(args.seeds):
            cfg = WoaConfig(
                dim=args.dim,
                bounds=uniform_bounds(args.dim, lo, hi),
                pop_size=args.pop,
                t_max=args.iters,
                seed=seed,
            )
            start = time.monotonic()
            result = woa_optimize(func, cfg)
            elapsed = time.monotonic() - start
            costs.append(result.best_cost)
            print(f"{name:<12} {seed:>4} {result.best_cost:>12.3e} {elapsed:>6.2f}")
        print(f"{name:<12} best {min(costs):.3e}  median {np.median(costs):.3e}\n")


if __name__ == "__main__":
    main()
