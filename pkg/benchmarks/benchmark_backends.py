#!/usr/bin/env python3
"""Throughput comparison of the compiled and pure-NumPy kernel backends.

Runs the two hot kernels (interpolated coupling, sticky radial SDE) on the
same pregenerated increments through both backends and reports path-steps
per second plus the bitwise-agreement check.

    python benchmarks/benchmark_backends.py [--paths N] [--steps N]
"""

import argparse
import time

import numpy as np

from stickysim.engine import _drift_params, _kappa_tables, _reference
from stickysim.model import KappaSpec, builtin_models

try:
    from stickysim.engine import _speedups
except ImportError:
    _speedups = None


def bench(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=64)
    ap.add_argument("--steps", type=int, default=50_000)
    args = ap.parse_args()
    n, steps = args.paths, args.steps
    total = n * steps
    rng = np.random.default_rng(0)

    print(f"workload: {n} paths x {steps} steps = {total/1e6:.1f}M path-steps")
    if _speedups is None:
        print("compiled backend not built; showing reference only")

    # coupling kernel
    pair = builtin_models("ou", {"m": [1.0]})
    pb, pbt = _drift_params(pair.b), _drift_params(pair.b_tilde)
    kxs, kvs = _kappa_tables(pair.kappa)
    xi = rng.standard_normal((n, steps, 2, 1))
    rec = np.array([steps], dtype=np.int64)
    sa, sb = np.array([0.0]), np.array([5.0])
    cargs = (pb, pbt, pair.M, kxs, kvs, np.zeros(1), np.zeros(1),
             2.5e-5, 0.05, xi, rec, sa, sb, False)
    t_ref, out_ref = bench(_reference.coupling_chunk, *cargs, repeat=1)
    print(f"coupling  python  : {total/t_ref/1e6:8.1f} M steps/s ({t_ref:.2f}s)")
    if _speedups is not None:
        t_c, out_c = bench(_speedups.coupling_chunk, *cargs)
        same = all(np.array_equal(out_c[i], out_ref[i]) for i in range(4))
        print(f"coupling  compiled: {total/t_c/1e6:8.1f} M steps/s ({t_c:.2f}s)"
              f"  speedup x{t_ref/t_c:.1f}  bitwise={same}")

    # sticky kernel
    kap = KappaSpec.constant(-0.5)
    kxs, kvs = _kappa_tables(kap)
    m_t = np.full(steps, 1.0)
    xi1 = rng.standard_normal((n, steps))
    expo = -np.log(rng.random((n, steps)))
    r0 = np.zeros(n)
    sargs = (m_t, kxs, kvs, 1e-3, 100, r0, xi1, expo, rec, 0)
    t_ref, out_ref = bench(_reference.sticky_chunk, *sargs, repeat=1)
    print(f"sticky    python  : {total/t_ref/1e6:8.1f} M steps/s ({t_ref:.2f}s)")
    if _speedups is not None:
        t_c, out_c = bench(_speedups.sticky_chunk, *sargs)
        same = all(np.array_equal(out_c[i], out_ref[i]) for i in range(5))
        print(f"sticky    compiled: {total/t_c/1e6:8.1f} M steps/s ({t_c:.2f}s)"
              f"  speedup x{t_ref/t_c:.1f}  bitwise={same}")


if __name__ == "__main__":
    main()
