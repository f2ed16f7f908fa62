"""Compare the compiled and numpy kernel backends.

Usage: python benchmarks/bench_kernels.py [--n 1024] [--repeat 5]
"""

import argparse
import time

import numpy as np

from patl import kernels
from patl.acoustic import ModalWaveOperator
from patl.medium import LayeredMedium


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1024, help="grid intervals")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    med = LayeredMedium.from_functions(args.n + 1, 1.0, 1.0, 3.0,
                                       c=lambda y: 1.0 + 0.2 * y)
    rng = np.random.default_rng(0)
    backends = ["python"]
    try:
        kernels.backend_module("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled backend not available; timing numpy only")

    m = args.n
    lower, upper = -rng.random(m), -rng.random(m)
    diag = 3.0 + rng.random(m)
    rhs = rng.random(m)
    probe = ModalWaveOperator(med, 1.0, 1.0, 4.0)
    f0, f1 = rng.random(probe.size), np.zeros(probe.size)
    gp, gv = rng.random(probe.nsteps + 1), rng.random(probe.nsteps + 1)
    rows = []
    results = {}
    for name in backends:
        mod = kernels.backend_module(name)
        op = ModalWaveOperator(med, 1.0, 1.0, 4.0, backend=name)
        t_tri = best_of(lambda: mod.solve_tridiagonal(lower, diag, upper, rhs), args.repeat)
        t_fwd = best_of(lambda: op.forward(f0, f1), args.repeat)
        t_adj = best_of(lambda: op.adjoint(gp, gv), args.repeat)
        results[name] = op.forward(f0, f1)[0]
        rows.append((name, t_tri, t_fwd, t_adj))

    print(f"n = {args.n}, time steps = {op.nsteps}, best of {args.repeat}")
    print(f"{'backend':<8} {'tridiag [ms]':>13} {'forward [ms]':>13} {'adjoint [ms]':>13}")
    for name, a, b, c in rows:
        print(f"{name:<8} {1e3 * a:13.3f} {1e3 * b:13.3f} {1e3 * c:13.3f}")
    if len(rows) == 2:
        print("speed-up (python / cython): "
              + ", ".join(f"{rows[1][i] / rows[0][i]:.1f}x" for i in (1, 2, 3))
              + " for tridiag, forward, adjoint")
        diff = np.max(np.abs(results["cython"] - results["python"]))
        print(f"max trace difference between backends: {diff:.2e}")


if __name__ == "__main__":
    main()
