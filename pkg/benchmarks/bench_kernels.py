#!/usr/bin/env python3
"""Benchmark the numba rollout kernels against their numpy fallbacks.

The dataset generators spend essentially all of their time in these
loops.  Run:

    python benchmarks/bench_kernels.py

FNSDA_NUMBA=0 selects the numpy path inside the package; here both
paths are timed explicitly (after a jit warmup pass).
"""

import time

import numpy as np

from fnsda.dynamics import kernels
from fnsda.dynamics.sampling import sample_gs, sample_go, sample_lv
from fnsda.dynamics.systems import GO_FIXED_PARAMS


def timed(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(name, nb_fn, py_fn, args):
    nb_fn(*args)  # jit warmup
    t_nb, out_nb = timed(nb_fn, *args)
    t_py, out_py = timed(py_fn, *args)
    diff = np.max(np.abs(out_nb - out_py))
    print(
        f"{name:<28s} numba {t_nb * 1e3:9.2f} ms   numpy {t_py * 1e3:9.2f} ms   "
        f"speedup {t_py / t_nb:6.1f}x   max|diff| {diff:.2e}"
    )


def main():
    rng = np.random.default_rng(0)
    print(f"numba available: {kernels.NUMBA_AVAILABLE}, enabled: {kernels.numba_enabled()}")

    y0 = np.stack([sample_lv(rng) for _ in range(100)])
    bench(
        "lv rollout (100 traj)",
        kernels._rollout_lv_nb,
        kernels._rollout_lv_py,
        (y0, 0.5, 0.75, 0.5, 1.0, False, 0.5, 10, 40),
    )

    y0 = np.stack([sample_go(rng) for _ in range(100)])
    p = kernels.go_param_vector(GO_FIXED_PARAMS)
    bench(
        "go rollout (100 traj)",
        kernels._rollout_go_nb,
        kernels._rollout_go_py,
        (y0, p, 0.05, 50, 40),
    )

    y0 = np.stack([sample_gs(rng, 32) for _ in range(4)])
    bench(
        "gs rollout (4 traj, 32x32)",
        kernels._rollout_gs_nb,
        kernels._rollout_gs_py,
        (y0, 0.2097, 0.105, 0.30, 0.062, 0.25, 40.0, 40, 10),
    )


if __name__ == "__main__":
    main()
