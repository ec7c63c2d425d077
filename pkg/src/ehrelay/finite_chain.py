"""Exact stationary analysis of policies that hold at most one packet.

A policy that only decodes when the relay is empty confines ``q_d`` to
``{0, 1}``. The chain then has ``2(N+1)`` states, ordered
``(0,0)..(0,N), (1,0)..(1,N)``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidParams, SingularChain
from .model import Policy, Static, SystemParams, Threshold
from .qbd_builder import mode_blocks, overflow_per_slot, transmit_mask, build_t


@dataclass(frozen=True)
class FiniteChainSolution:
    pi: np.ndarray
    alpha_bar: float
    mean_qd: float        # time-average, counts the decode slot's second half
    mean_qd_slot: float   # sampled at slot starts
    throughput: float
    delay: float
    delay_slot: float
    p_block: float
    p_active: float
    delay_at_r: float


def level0_alphas(policy: Policy, n_cap: int) -> np.ndarray:
    if isinstance(policy, Static):
        raise InvalidParams("static policies leave q_d unbounded; use the QBD solver")
    table = policy.alpha_table(n_cap)
    if table[1:].any():
        raise InvalidParams("policy decodes with a backlogged relay; not a finite chain")
    return table[0]


def build_dynamic_chain(params: SystemParams, policy: Policy, gated: bool = True) -> np.ndarray:
    """Row-stochastic transition matrix over ``{0,1} x {0..N}``."""
    a = level0_alphas(policy, params.n_cap)
    dd, eh = mode_blocks(params, gated)
    n = params.n_cap + 1
    p = np.empty((2 * n, 2 * n))
    p[:n, :n] = a[:, None] * dd.b00 + (1 - a)[:, None] * eh.b00
    p[:n, n:] = a[:, None] * dd.b01 + (1 - a)[:, None] * eh.b01
    p[n:, :n] = eh.a_down
    p[n:, n:] = eh.a_same
    return p


def _closed_class(p: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(p.shape[0], dtype=bool)
    seen[start] = True
    todo = deque([start])
    while todo:
        i = todo.popleft()
        for j in np.flatnonzero(p[i] > 0):
            if not seen[j]:
                seen[j] = True
                todo.append(j)
    return np.flatnonzero(seen)


def _solve_replaced(p: np.ndarray) -> np.ndarray:
    n = p.shape[0]
    lhs = (p - np.eye(n)).T
    lhs[-1] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    return np.linalg.solve(lhs, rhs)


def solve_stationary(chain: np.ndarray, start: Optional[int] = None,
                     tol: float = 1e-10) -> np.ndarray:
    """Stationary row vector of a finite unichain.

    Dense solve of ``pi (P - I) = 0`` with one equation replaced by
    ``sum(pi) = 1``. If that system is singular (several recurrent
    classes), ``start`` names a state whose reachable closed class is used.
    """
    n = chain.shape[0]
    try:
        pi = _solve_replaced(chain)
        ok = np.isfinite(pi).all() and np.abs(pi @ chain - pi).max() < tol and pi.min() > -tol
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        if start is None:
            raise SingularChain("stationary system is singular and no start state given")
        cls = _closed_class(chain, start)
        sub = chain[np.ix_(cls, cls)]
        if np.abs(sub.sum(axis=1) - 1).max() > 1e-12:
            raise SingularChain("reachable set from start state is not closed")
        try:
            sub_pi = _solve_replaced(sub)
        except np.linalg.LinAlgError:
            raise SingularChain("multiple recurrent classes reachable from start") from None
        if np.abs(sub_pi @ sub - sub_pi).max() > tol:
            raise SingularChain("multiple recurrent classes reachable from start")
        pi = np.zeros(n)
        pi[cls] = sub_pi
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def dynamic_metrics(params: SystemParams, policy: Policy, pi: np.ndarray) -> FiniteChainSolution:
    ps, pr = params.p_det_s, params.p_det_r
    n = params.n_cap + 1
    a = level0_alphas(policy, params.n_cap)
    pi0, pi1 = pi[:n], pi[n:]

    alpha_bar = float(pi0 @ a)
    rate_in = (1 - ps) * alpha_bar
    backlogged = float(pi1.sum())
    # A packet decoded this slot sits at the relay for the second subslot.
    mean_qd = 0.5 * rate_in + backlogged
    throughput = ps + rate_in

    send = transmit_mask(params).astype(float)
    reach_k = build_t(params) @ send
    p_active = float(pi0 @ (a * (1 - ps) * send) + pi1 @ reach_k)

    offered = (1 - alpha_bar) * params.mean_energy
    lost = float(pi0 @ ((1 - a) * overflow_per_slot(params)) + pi1 @ overflow_per_slot(params))
    p_block = lost / offered if offered > 0 else 0.0
    if rate_in > 0:
        delay_at_r = mean_qd / rate_in
    else:
        from .optimizers import compute_tn
        delay_at_r = compute_tn(params) - 0.5
    return FiniteChainSolution(
        pi=pi,
        alpha_bar=alpha_bar,
        mean_qd=mean_qd,
        mean_qd_slot=backlogged,
        throughput=throughput,
        delay=(mean_qd + 1) / throughput,
        delay_slot=(backlogged + 1) / throughput,
        p_block=p_block,
        p_active=p_active,
        delay_at_r=float(delay_at_r),
    )


def solve_dynamic(params: SystemParams, policy: Policy, gated: bool = True) -> FiniteChainSolution:
    chain = build_dynamic_chain(params, policy, gated)
    # (0, N) is recurrent whenever the relay ever harvests.
    pi = solve_stationary(chain, start=params.n_cap)
    return dynamic_metrics(params, policy, pi)


def threshold_metrics(params: SystemParams, e_th: int, beta: float) -> FiniteChainSolution:
    return solve_dynamic(params, Threshold(e_th, beta))
