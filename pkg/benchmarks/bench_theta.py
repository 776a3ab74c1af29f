"""Benchmark the hot theta-series kernel: numba @njit vs pure numpy.

The q-series summation dominates monodromy transport (every Runge-Kutta
stage evaluates a batch of theta values), so this is the loop the numba
path exists for.  Run:

    python benchmarks/bench_theta.py

Set DUNKLAB_PURE_NUMPY=1 to check that the package itself runs on the
fallback path; this script always times both implementations directly.
"""

import time

import numpy as np

from dunklab import _kernels
from dunklab.theta import ThetaEvaluator


def timeit(fn, *args, repeat=200):
    fn(*args)  # warm up (and JIT-compile)
    best = np.inf
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeat):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / repeat)
    return best


def main():
    ev = ThetaEvaluator(1j)
    rng = np.random.default_rng(0)
    print(f"series terms: {ev.truncation}")
    print(f"{'batch':>8} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for size in (8, 64, 512, 4096):
        z = (rng.uniform(-0.5, 0.5, size)
             + 1j * rng.uniform(-0.5, 0.5, size)).astype(np.complex128)
        t_np = timeit(_kernels.theta_sums_numpy, z, ev.cached_powers, 2)
        if _kernels.USING_NUMBA:
            t_nb = timeit(_kernels.theta_sums, z, ev.cached_powers, 2)
            print(f"{size:>8} {t_np * 1e6:>10.1f}us {t_nb * 1e6:>10.1f}us "
                  f"{t_np / t_nb:>8.1f}x")
        else:
            print(f"{size:>8} {t_np * 1e6:>10.1f}us {'(no numba)':>12}")

    # end-to-end: one wall-loop transport on the order-4 rotation family
    from dunklab.cli import LabConfig, build_instance
    from dunklab.connection import build_connection
    from dunklab.monodromy import (FlatSectionSystem, braid_generators,
                                   pick_basepoint, transport)
    cfg = LabConfig.from_dict({"family": "cyclic", "order": 4,
                               "couplings": [0.2, 0.05], "seed": 7})
    inst = build_instance(cfg)
    acf = build_connection(inst.bundle, inst.params, inst.group, inst.hypertori)
    sysf = FlatSectionSystem(acf)
    x = pick_basepoint(inst.torus, inst.group, inst.hypertori, seed=7)
    gens = braid_generators(inst.group, inst.torus, inst.hypertori, x)
    path = gens["hypertorus"][0]
    t0 = time.perf_counter()
    transport(sysf, path)
    dt = time.perf_counter() - t0
    label = "numba" if _kernels.USING_NUMBA else "numpy"
    print(f"\nwall-loop transport, cyclic(4), {label} kernels: {dt:.2f} s")


if __name__ == "__main__":
    main()
