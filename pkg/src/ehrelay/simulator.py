"""Slot-level Monte Carlo of the source / relay / destination protocol.

Each replication draws from its own Philox stream keyed by
``seed ^ replication``. Statistics are pooled over the post-warmup window
of every replication; standard errors come from batch means.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernel as K
from .model import Policy, SystemParams

CHUNK = 1 << 16


@dataclass(frozen=True)
class SimConfig:
    slots: int = 1_000_000
    warmup: int = 10_000
    seed: int = 2024
    replications: int = 1
    batches: int = 20
    parallel: int = 1

    def __post_init__(self):
        if self.warmup >= self.slots:
            raise ValueError("warmup must be shorter than the run")
        if self.replications < 1 or self.batches < 2:
            raise ValueError("need replications >= 1 and batches >= 2")


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.se


@dataclass
class SimStats:
    throughput: Estimate
    mean_delay: Estimate          # whole slots, HoL at S through detection at D
    mean_delay_subslot: Estimate  # relayed packets end half a slot later
    p_active: float
    p_block: float
    mean_qd: Estimate
    alpha_bar_emp: float
    delivered: int
    relayed_fraction: float
    measured_slots: int
    counters: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "throughput": self.throughput.mean,
            "throughput_se": self.throughput.se,
            "mean_delay": self.mean_delay.mean,
            "mean_delay_se": self.mean_delay.se,
            "mean_delay_subslot": self.mean_delay_subslot.mean,
            "mean_delay_subslot_se": self.mean_delay_subslot.se,
            "p_active": self.p_active,
            "p_block": self.p_block,
            "mean_qd": self.mean_qd.mean,
            "alpha_bar_emp": self.alpha_bar_emp,
            "delivered": self.delivered,
        }


def _replication(params: SystemParams, alpha_tab: np.ndarray, cfg: SimConfig, rep: int,
                 trace_slots: int = 0):
    rng = np.random.Generator(np.random.Philox(key=(cfg.seed ^ rep) & (2**64 - 1)))
    cdf = np.cumsum(params.energy.as_array())
    cdf[-1] = 1.0
    batch_len = -(-(cfg.slots - cfg.warmup) // cfg.batches)
    state = np.zeros(4, dtype=np.int64)
    counters = np.zeros(K.N_COUNTERS, dtype=np.int64)
    acc = np.zeros((cfg.batches, K.N_ACC))
    fifo = np.zeros(1024, dtype=np.int64)
    trace = np.zeros((trace_slots, 7), dtype=np.int64) if trace_slots else K.empty_trace()
    t = 0
    while t < cfg.slots:
        n = min(CHUNK, cfg.slots - t)
        need = state[K.S_QD] + n + 1
        if need > fifo.shape[0]:
            q_d, head = state[K.S_QD], state[K.S_HEAD]
            queued = fifo[(head + np.arange(q_d)) % fifo.shape[0]]
            fifo = np.zeros(max(2 * fifo.shape[0], 2 * need), dtype=np.int64)
            fifo[:q_d] = queued
            state[K.S_HEAD] = 0
        u = rng.random((4, n))
        gamma = np.searchsorted(cdf, u[3], side="right").astype(np.int64)
        np.minimum(gamma, params.b_max, out=gamma)
        tr = trace[t:t + n] if trace_slots and t < trace_slots else K.empty_trace()
        K.run_slots(alpha_tab, params.k_cost, params.n_cap, params.p_det_s, params.p_det_r,
                    u[0], u[1], u[2], gamma, t, cfg.warmup, batch_len,
                    state, fifo, counters, acc, np.ascontiguousarray(tr) if tr.size else tr)
        if trace_slots and t < trace_slots:
            trace[t:t + n] = tr
        t += n
    return state, counters, acc, trace


def _ratio_estimate(num: np.ndarray, den: np.ndarray) -> Estimate:
    mask = den > 0
    total = num.sum() / den.sum() if den.sum() > 0 else math.nan
    vals = num[mask] / den[mask]
    se = vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else math.nan
    return Estimate(float(total), float(se))


def run(params: SystemParams, policy: Policy, config: SimConfig = SimConfig()) -> SimStats:
    """Simulate ``config.replications`` independent runs of ``policy``."""
    alpha_tab = np.ascontiguousarray(policy.alpha_table(params.n_cap))
    reps = range(config.replications)
    if config.parallel > 1 and config.replications > 1:
        with ProcessPoolExecutor(config.parallel) as ex:
            outs = list(ex.map(_replication, [params] * len(reps), [alpha_tab] * len(reps),
                               [config] * len(reps), reps))
    else:
        outs = [_replication(params, alpha_tab, config, r) for r in reps]

    acc = np.vstack([o[2] for o in outs])
    totals = acc.sum(axis=0)
    slots = acc[:, K.A_SLOTS]
    counters = {
        "harvested": 0, "blocked": 0, "consumed": 0, "s_departures": 0,
        "direct": 0, "stored": 0, "relayed": 0, "max_qd": 0,
        "final_qd": 0, "final_qe": 0,
    }
    for state, c, _, _ in outs:
        for key, idx in (("harvested", K.C_HARVEST), ("blocked", K.C_BLOCKED),
                         ("consumed", K.C_CONSUMED), ("s_departures", K.C_S_DEPART),
                         ("direct", K.C_DIRECT), ("stored", K.C_STORED),
                         ("relayed", K.C_RELAYED)):
            counters[key] += int(c[idx])
        counters["max_qd"] = max(counters["max_qd"], int(c[K.C_MAX_QD]))
        counters["final_qd"] += int(state[K.S_QD])
        counters["final_qe"] += int(state[K.S_QE])
    counters["per_replication"] = [
        {"state": [int(x) for x in s], "counters": [int(x) for x in c]} for s, c, _, _ in outs
    ]

    offered = totals[K.A_OFFERED]
    delivered = totals[K.A_DELIV]
    return SimStats(
        throughput=_ratio_estimate(acc[:, K.A_DELIV], slots),
        mean_delay=_ratio_estimate(acc[:, K.A_DELAY], acc[:, K.A_DELIV]),
        mean_delay_subslot=_ratio_estimate(acc[:, K.A_DELAY_SUB], acc[:, K.A_DELIV]),
        p_active=float(totals[K.A_ACTIVE] / totals[K.A_SLOTS]),
        p_block=float(totals[K.A_BLOCKED] / offered) if offered > 0 else 0.0,
        mean_qd=_ratio_estimate(acc[:, K.A_QD], slots),
        alpha_bar_emp=float(totals[K.A_DD] / totals[K.A_SLOTS]),
        delivered=int(delivered),
        relayed_fraction=float(totals[K.A_RELAYED] / delivered) if delivered else 0.0,
        measured_slots=int(totals[K.A_SLOTS]),
        counters=counters,
    )


def run_policy_comparison(params: SystemParams, policies: Sequence[Policy],
                          config: SimConfig = SimConfig(), common_random_numbers: bool = True):
    """One ``SimStats`` per policy; shared seeds unless CRN is switched off."""
    if not policies:
        raise ValueError("need at least one policy")
    out = []
    for i, pol in enumerate(policies):
        cfg = config
        if not common_random_numbers:
            cfg = SimConfig(config.slots, config.warmup, config.seed ^ ((i + 1) << 32),
                            config.replications, config.batches, config.parallel)
        out.append(run(params, pol, cfg))
    return out


TRACE_COLUMNS = ("slot", "q_d", "q_e", "flags", "blocked", "q_d_next", "q_e_next")


def trace_run(params: SystemParams, policy: Policy, slots: int, seed: int = 2024,
              initial_qe: Optional[int] = None) -> np.ndarray:
    """Per-slot record of a single short run (no warmup), for protocol audits.

    Columns are ``TRACE_COLUMNS``; ``flags`` is a bitmask of DD mode,
    direct delivery, relay storage, relay attempt and relay success.
    """
    cfg = SimConfig(slots=slots, warmup=0, seed=seed, batches=2)
    alpha_tab = np.ascontiguousarray(policy.alpha_table(params.n_cap))
    if initial_qe is None:
        return _replication(params, alpha_tab, cfg, 0, trace_slots=slots)[3]
    # Custom start: run the kernel directly.
    rng = np.random.Generator(np.random.Philox(key=seed))
    u = rng.random((4, slots))
    cdf = np.cumsum(params.energy.as_array())
    cdf[-1] = 1.0
    gamma = np.minimum(np.searchsorted(cdf, u[3], side="right"), params.b_max).astype(np.int64)
    state = np.array([0, initial_qe, 0, 0], dtype=np.int64)
    trace = np.zeros((slots, 7), dtype=np.int64)
    K.run_slots(alpha_tab, params.k_cost, params.n_cap, params.p_det_s, params.p_det_r,
                u[0], u[1], u[2], gamma, 0, 0, slots, state, np.zeros(slots + 1, dtype=np.int64),
                np.zeros(K.N_COUNTERS, dtype=np.int64), np.zeros((1, K.N_ACC)), trace)
    return trace
