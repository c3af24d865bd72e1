"""Benchmark the solver hot kernels: numba backend vs pure-numpy fallback.

Run:
    python benchmarks/bench_kernels.py [--nodes 200000] [--targets 8] [--reps 50]

The same comparison at the whole-solve level:
    REFRACTOR_BACKEND=numpy python benchmarks/bench_kernels.py --solve
    REFRACTOR_BACKEND=numba python benchmarks/bench_kernels.py --solve
"""

import argparse
import time

import numpy as np

from refractor import kernels


def time_fn(fn, reps):
    fn()  # warm up (JIT compile on the numba path)
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def bench_kernels(nodes, targets, reps):
    rng = np.random.default_rng(0)
    dots = rng.uniform(-0.6, 0.6, (nodes, targets))
    b = rng.uniform(0.5, 2.0, targets)
    w = rng.uniform(0.1, 1.0, nodes)

    print(f"nodes={nodes} targets={targets} reps={reps}")
    print(f"{'kernel':<16}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    rows = [
        ("tally", lambda: kernels.tally(dots, b, w)),
        ("win_thresholds", lambda: kernels.win_thresholds(dots, b, 2)),
    ]
    for name, fn in rows:
        kernels.set_backend("numpy")
        t_np = time_fn(fn, reps)
        kernels.set_backend("numba")
        t_nb = time_fn(fn, reps)
        print(f"{name:<16}{t_np * 1e3:>10.3f}ms{t_nb * 1e3:>10.3f}ms"
              f"{t_np / t_nb:>9.1f}x")


def bench_solve():
    from refractor.norms import MediumPair, dual_gradient, norm_gradient
    from refractor.solver import (SourceDensity, TargetMeasure,
                                  solve_discrete)

    pair = MediumPair.isotropic(1.5, 1.0)
    axis = np.array([0.0, 0.0, 1.0])
    src = SourceDensity.from_cap(pair.n1, axis, 0.25, 20_000)
    rng = np.random.default_rng(1)
    center = dual_gradient(pair.n2, norm_gradient(pair.n1, src.nodes).mean(0))
    dirs = np.vstack([center] + [center + 0.1 * rng.standard_normal(3)
                                 for _ in range(4)])
    from refractor.norms import norm_eval

    dirs /= norm_eval(pair.n2, dirs)[:, None]
    g = rng.uniform(0.5, 1.5, 5)
    g *= src.total / g.sum()
    tgt = TargetMeasure.of(pair.n2, dirs, g)

    solve_discrete(pair, src, tgt, 1.0, 1e-3)  # warm up
    t0 = time.perf_counter()
    r = solve_discrete(pair, src, tgt, 1.0, 1e-3)
    dt = time.perf_counter() - t0
    print(f"backend={kernels.active_backend()} solve 2e4x5: {dt:.2f}s "
          f"({r.info.sweeps} sweeps, residual {r.info.residual:.2e})")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=200_000)
    ap.add_argument("--targets", type=int, default=8)
    ap.add_argument("--reps", type=int, default=50)
    ap.add_argument("--solve", action="store_true",
                    help="time a full design solve on the active backend")
    args = ap.parse_args()
    if args.solve:
        bench_solve()
    else:
        bench_kernels(args.nodes, args.targets, args.reps)
