"""Compare the compiled resolvent kernel with the NumPy fallback.

    python3 benchmarks/bench_sweep.py [--points 400 4000 40000] [--threads 1 4]

Timings use the closed-form linearization of the reference configuration
(the kernel cost does not depend on stability).
"""

import argparse
import time

import numpy as np

from vecselnoise import ModelParams, build_system
from vecselnoise._sweep_py import sweep_kernel as numpy_kernel
from vecselnoise.basis import quadrature_vectors

try:
    from vecselnoise._sweep import sweep_kernel as cython_kernel
except ImportError:
    cython_kernel = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, nargs="+", default=[400, 4000, 40000])
    ap.add_argument("--threads", type=int, nargs="+", default=[1, 4])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    system = build_system(ModelParams().with_pump_ratio(1.01), refine=False)
    D, Diff = system.D, system.Diff
    va, vb = quadrature_vectors()

    print(f"{'points':>8} {'backend':>14} {'seconds':>10} {'us/point':>10} {'max rel diff':>14}")
    for n in args.points:
        om = np.geomspace(1e-2, 1e6, n)
        t_np, (ref, _) = best_of(lambda: numpy_kernel(D, Diff, va, vb, om), args.repeat)
        print(f"{n:>8} {'numpy':>14} {t_np:>10.4f} {1e6 * t_np / n:>10.2f} {'-':>14}")
        if cython_kernel is None:
            print(f"{n:>8} {'cython':>14} {'(not built)':>10}")
            continue
        for th in args.threads:
            t_cy, (d, _) = best_of(lambda: cython_kernel(D, Diff, va, vb, om, th), args.repeat)
            rel = np.max(np.abs(d[:, :2].real - ref[:, :2].real) / np.abs(ref[:, :2].real))
            label = f"cython x{th}"
            print(f"{n:>8} {label:>14} {t_cy:>10.4f} {1e6 * t_cy / n:>10.2f} {rel:>14.2e}"
                  f"   speedup {t_np / t_cy:5.1f}")


if __name__ == "__main__":
    main()
