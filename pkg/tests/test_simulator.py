import json
import os
import subprocess
import sys

import numpy as np
import pytest

from ehrelay import SimConfig, Static, Threshold, run, run_policy_comparison, solve_dynamic
from ehrelay import _kernel as K
from ehrelay._accel import USING_NUMBA, python_impl
from ehrelay.qbd_solver import evaluate_static
from ehrelay.simulator import TRACE_COLUMNS, trace_run

SHORT = SimConfig(slots=200_000, warmup=5_000, seed=7)


def _kernel_inputs(params, policy, n, seed):
    rng = np.random.default_rng(seed)
    u = rng.random((4, n))
    cdf = np.cumsum(params.energy.as_array())
    gamma = np.minimum(np.searchsorted(cdf, u[3], side="right"), params.b_max).astype(np.int64)
    return (np.ascontiguousarray(policy.alpha_table(params.n_cap)), params.k_cost, params.n_cap,
            params.p_det_s, params.p_det_r, u[0], u[1], u[2], gamma, 0, 100, 1000,
            np.zeros(4, np.int64), np.zeros(n + 1, np.int64), np.zeros(K.N_COUNTERS, np.int64),
            np.zeros((n // 1000 + 1, K.N_ACC)), np.zeros((n, 7), np.int64))


@pytest.mark.skipif(not USING_NUMBA, reason="numba disabled")
def test_jit_and_python_bit_identical(t3):
    a = _kernel_inputs(t3, Static(0.2), 20_000, 3)
    b = _kernel_inputs(t3, Static(0.2), 20_000, 3)
    K.run_slots(*a)
    python_impl(K.run_slots)(*b)
    for x, y in zip(a[-5:], b[-5:]):
        assert np.array_equal(x, y)


def test_env_flag_fallback_matches(t3):
    code = ("import json;from ehrelay import *;"
            "s=run(table3_params(),Static(0.15),SimConfig(slots=30000,warmup=1000,seed=5));"
            "import ehrelay._accel as A;print(json.dumps([A.USING_NUMBA,s.summary()]))")
    env = dict(os.environ, EHRELAY_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    used, summary = json.loads(out.stdout)
    assert used is False
    here = run(t3, Static(0.15), SimConfig(slots=30000, warmup=1000, seed=5)).summary()
    assert summary == json.loads(json.dumps(here))


def test_deterministic(t3):
    a = run(t3, Static(0.1), SHORT)
    b = run(t3, Static(0.1), SHORT)
    assert a.summary() == b.summary()
    c = run(t3, Static(0.1), SimConfig(slots=200_000, warmup=5_000, seed=8))
    assert c.summary() != a.summary()


def test_conservation(t3):
    cfg = SimConfig(slots=150_000, warmup=1000, seed=3, replications=3)
    s = run(t3, Static(0.2), cfg)
    for rep in s.counters["per_replication"]:
        st, c = rep["state"], rep["counters"]
        assert c[K.C_HARVEST] - c[K.C_BLOCKED] - c[K.C_CONSUMED] == st[K.S_QE]
        assert c[K.C_S_DEPART] - c[K.C_DIRECT] - c[K.C_RELAYED] == st[K.S_QD]


def test_fifo_growth_keeps_order(small):
    # unstable static policy: the relay queue grows past the initial ring size
    cfg = SimConfig(slots=300_000, warmup=1000, seed=1)
    s = run(small, Static(0.9), cfg)
    assert s.counters["max_qd"] > 5000
    assert s.mean_delay.mean > 0


def test_noncooperation(t3):
    s = run(t3, Static(0.0), SimConfig(slots=300_000, seed=2))
    assert s.throughput.within(0.3)
    assert s.mean_delay.within(1 / 0.3)
    assert s.p_active == 0 and s.alpha_bar_emp == 0


def test_static_matches_analysis(t3):
    s = run(t3, Static(0.1), SimConfig(slots=400_000, seed=4))
    _, m = evaluate_static(t3, 0.1)
    assert s.throughput.within(m.throughput, 4)
    assert s.throughput.within(0.3 + 0.1 * 0.7 / 0.9 * 0.9, 4)
    assert abs(s.p_active - m.p_active) < 0.01


def test_threshold_holds_at_most_one_and_never_blocks(t4):
    pol = Threshold.at_least(t4.n_cap - t4.b_max + 1)
    s = run(t4, pol, SimConfig(slots=200_000, warmup=0, seed=9))
    assert s.counters["max_qd"] <= 1
    assert s.counters["blocked"] == 0
    assert s.p_block == 0.0


def test_little_law(t4):
    s = run(t4, Threshold(40, 1.0), SimConfig(slots=400_000, seed=6))
    lhs = s.mean_qd.mean + 1
    rhs = s.throughput.mean * s.mean_delay.mean
    se = rhs * (s.throughput.se / s.throughput.mean + s.mean_delay.se / s.mean_delay.mean)
    assert abs(lhs - rhs) < 3 * (se + s.mean_qd.se)


def test_subslot_delay_vs_finite_chain(t4):
    pol = Threshold(39, 1.0)
    s = run(t4, pol, SimConfig(slots=400_000, seed=10))
    sol = solve_dynamic(t4, pol)
    assert s.mean_delay_subslot.within(sol.delay, 4)
    assert s.mean_delay.within(sol.delay_slot, 4)
    assert s.alpha_bar_emp == pytest.approx(sol.alpha_bar, abs=0.01)


def test_policy_comparison_crn(t3):
    out = run_policy_comparison(t3, [Static(0.1), Static(0.1)], SHORT)
    assert out[0].summary() == out[1].summary()
    indep = run_policy_comparison(t3, [Static(0.1), Static(0.1)], SHORT,
                                  common_random_numbers=False)
    assert indep[0].summary() != indep[1].summary()
    with pytest.raises(ValueError):
        run_policy_comparison(t3, [], SHORT)


def test_parallel_replications_match_serial(t3):
    cfg = SimConfig(slots=50_000, warmup=1000, seed=12, replications=2)
    par = SimConfig(slots=50_000, warmup=1000, seed=12, replications=2, parallel=2)
    assert run(t3, Static(0.1), cfg).summary() == run(t3, Static(0.1), par).summary()


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(slots=10, warmup=10)
    with pytest.raises(ValueError):
        SimConfig(replications=0)


def test_trace_protocol_audit(small):
    tr = trace_run(small, Threshold(4, 1.0), 2000, seed=3)
    assert tr.shape == (2000, len(TRACE_COLUMNS))
    assert np.array_equal(tr[:, 0], np.arange(2000))
    assert np.array_equal(tr[1:, 1], tr[:-1, 5]) and np.array_equal(tr[1:, 2], tr[:-1, 6])
    flags = tr[:, 3]
    direct = (flags & K.F_DIRECT) > 0
    stored = (flags & K.F_STORED) > 0
    assert not np.any(direct & stored)  # D's ACK preempts storage
    assert np.all((flags[stored] & K.F_DD) > 0)
    attempt = (flags & K.F_ATTEMPT) > 0
    # an attempt costs K whether or not it succeeds
    dd = (flags & K.F_DD) > 0
    gain = np.where(dd, 0, tr[:, 6] - tr[:, 2] + np.where(attempt, small.k_cost, 0))
    assert np.all(tr[attempt, 6] + small.k_cost - tr[attempt, 2] >= 0)
    assert np.all(gain >= 0) and np.all(gain <= small.b_max)
    assert np.all(tr[:, 1] <= 1)


def test_trace_from_custom_start(small):
    tr = trace_run(small, Static(0.0), 50, initial_qe=6)
    assert tr[0, 2] == 6
