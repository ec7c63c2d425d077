"""Slot-loop throughput: numba kernel versus its pure-Python body.

    python3 benchmarks/bench_simulator.py [--slots N]
"""
import argparse
import time

import numpy as np

from ehrelay import Static, Threshold, table3_params, table4_params
from ehrelay import _kernel as K
from ehrelay._accel import USING_NUMBA, python_impl


def inputs(params, policy, n, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.random((4, n))
    cdf = np.cumsum(params.energy.as_array())
    gamma = np.minimum(np.searchsorted(cdf, u[3], side="right"), params.b_max).astype(np.int64)
    return (np.ascontiguousarray(policy.alpha_table(params.n_cap)), params.k_cost, params.n_cap,
            params.p_det_s, params.p_det_r, u[0], u[1], u[2], gamma, 0, 0, n,
            np.zeros(4, np.int64), np.zeros(n + 1, np.int64), np.zeros(K.N_COUNTERS, np.int64),
            np.zeros((1, K.N_ACC)), K.empty_trace())


def bench(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        a = [x.copy() if isinstance(x, np.ndarray) else x for x in args]
        t = time.perf_counter()
        fn(*a)
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--slots", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    cases = [("static 0.2, N=100", table3_params(), Static(0.2)),
             ("threshold 39, N=45", table4_params(0.9), Threshold(39, 1.0))]
    print(f"numba active: {USING_NUMBA}; {a.slots} slots per run")
    for name, params, pol in cases:
        args = inputs(params, pol, a.slots)
        K.run_slots(*[x.copy() if isinstance(x, np.ndarray) else x for x in args])  # compile
        t_jit = bench(K.run_slots, args, a.repeat)
        t_py = bench(python_impl(K.run_slots), args, 1)
        print(f"{name:22s} jit {a.slots / t_jit / 1e6:8.2f} Mslot/s   "
              f"python {a.slots / t_py / 1e6:8.3f} Mslot/s   speedup {t_py / t_jit:6.0f}x")


if __name__ == "__main__":
    main()
