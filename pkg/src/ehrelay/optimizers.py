"""Throughput- and delay-optimal time-switching policies.

Delay is reported in one of two conventions:

``"slot"``
    mean queue sampled at slot starts; a relayed packet's delay counts
    whole slots from when it became head-of-line at S up to and including
    the slot it reaches D.
``"subslot"``
    time-average queue; a packet decoded by R occupies it during the
    second half of its decode slot, so relayed packets carry an extra
    half slot.

Both agree at ``alpha = 0`` (``1 / p_S``). The static search defaults to
``"slot"`` and the dynamic search to ``"subslot"``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidThreshold, NonAbsorbing
from .finite_chain import solve_dynamic
from .model import Policy, Static, SystemParams, Threshold
from .qbd_builder import build_t, transmit_mask
from .qbd_solver import solve_static, static_metrics

GOLDEN = 0.382
BOUNDARY_GUARD = 1e-6
TIE_TOL = 1e-9
CONVENTIONS = ("slot", "subslot")


@dataclass
class OptimizationResult:
    best_policy: Policy
    objective: float
    cooperation: bool
    convention: str
    search_trace: list = field(default_factory=list)
    evaluations: int = 0

    def to_json(self) -> dict:
        return {
            "policy": self.best_policy.to_json(),
            "objective": self.objective,
            "cooperation": self.cooperation,
            "convention": self.convention,
            "evaluations": self.evaluations,
            "trace": [[_jsonable(c), v] for c, v in self.search_trace],
        }


def _jsonable(c):
    if isinstance(c, tuple):
        return list(c)
    return c


def _check_convention(convention):
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


def alpha_t(params: SystemParams) -> float:
    """Static DD probability that keeps the relay queue on the stability boundary."""
    eg = params.mean_energy
    num = eg * params.p_det_r
    den = num + params.k_cost * (1 - params.p_det_s)
    return num / den if den > 0 else 0.0


def compute_tn(params: SystemParams) -> float:
    """Expected slots to deliver one relay packet that starts at a full battery.

    The relay harvests in every slot while the packet waits (so the
    battery at ``N`` is unchanged in the first slot), transmits whenever
    ``q_e >= K`` and pays ``K`` units per attempt. The slot of the first
    attempt counts as one.
    """
    pr = params.p_det_r
    if pr <= 0:
        raise NonAbsorbing("p_det_r = 0: the packet is never delivered")
    n = params.n_cap + 1
    t = build_t(params)
    send = transmit_mask(params)
    # Energy transition when the attempt (if any) fails or is skipped.
    keep = np.zeros((n, n))
    i = np.arange(n)
    keep[i[send], i[send] - params.k_cost] = 1 - pr
    keep[i[~send], i[~send]] = 1.0
    q = t @ keep
    h = np.linalg.solve(np.eye(n) - q, np.ones(n))
    return float(h[-1])


def noncoop_check(params: SystemParams, convention: str = "slot") -> bool:
    """``True`` when never decoding (``alpha = 0``) is delay-optimal.

    Compares the relay sojourn of a lone packet, in the chosen delay
    convention, against the direct-link delay ``1 / p_S``.
    """
    _check_convention(convention)
    offset = 1.0 if convention == "slot" else 0.5
    return compute_tn(params) - offset > 1.0 / params.p_det_s


def golden_section(f: Callable[[float], float], a: float, b: float, eps: float,
                   abs_tol: float = 1e-9):
    """Bracket-shrinking search with the 0.382 split.

    Stops when the relative width ``(b - a) / b`` drops below ``eps`` or the
    absolute width below ``abs_tol`` (needed when the minimum is at 0).
    Returns ``(a, b, trace)`` where ``trace`` lists every ``(x, f(x))``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    trace = []

    def ev(x):
        v = f(x)
        trace.append((x, v))
        return v

    while (b - a) >= eps * b and (b - a) > abs_tol:
        a1 = a + GOLDEN * (b - a)
        b1 = b - GOLDEN * (b - a)
        if ev(a1) < ev(b1):
            b = b1
        else:
            a = a1
    return a, b, trace


def static_delay(params: SystemParams, alpha: float, convention: str = "slot", **solver_kw) -> float:
    sol = solve_static(params, alpha, **solver_kw)
    if not sol.stable:
        return math.inf
    m = static_metrics(params, alpha, sol)
    return m.delay if convention == "slot" else m.delay_subslot


def dynamic_delay(params: SystemParams, e_th: int, beta: float, convention: str = "subslot") -> float:
    sol = solve_dynamic(params, Threshold(e_th, beta))
    return sol.delay if convention == "subslot" else sol.delay_slot


def optimize_static(params: SystemParams, eps: float = 0.01, convention: str = "slot",
                    **solver_kw) -> OptimizationResult:
    """Delay-optimal static DD probability (golden-section over ``[0, alpha^T]``)."""
    _check_convention(convention)
    noncoop = 1.0 / params.p_det_s
    if noncoop_check(params, convention):
        return OptimizationResult(Static(0.0), noncoop, False, convention, [(0.0, noncoop)], 0)

    hi = alpha_t(params)

    def tau(x):
        return static_delay(params, min(x, hi - BOUNDARY_GUARD), convention, **solver_kw)

    a, b, trace = golden_section(tau, 0.0, hi, eps)
    best = 0.5 * (a + b)
    obj = tau(best)
    trace.append((best, obj))
    if not obj < noncoop:
        return OptimizationResult(Static(0.0), noncoop, False, convention, trace, len(trace))
    return OptimizationResult(Static(min(best, hi - BOUNDARY_GUARD)), obj, True, convention,
                              trace, len(trace))


def optimize_dynamic(params: SystemParams, eps: float = 0.01, convention: str = "subslot",
                     e_th_range: Optional[range] = None) -> OptimizationResult:
    """Delay-optimal threshold policy: exhaustive ``e_th``, golden-section ``beta``.

    The incumbent starts at the non-cooperation delay. A later (smaller)
    ``e_th`` only replaces it when better by more than ``TIE_TOL``.
    """
    _check_convention(convention)
    n = params.n_cap
    if e_th_range is None:
        e_th_range = range(n, max(n - params.b_max + 1, 0) - 1, -1)
    best_policy: Policy = Threshold(n, 0.0)
    best = 1.0 / params.p_det_s
    trace = []
    for e_th in e_th_range:
        def tau(beta, e_th=e_th):
            return dynamic_delay(params, e_th, beta, convention)

        a, b, inner = golden_section(tau, 0.0, 1.0, eps)
        trace.extend(((e_th, x), v) for x, v in inner)
        # The midpoint, plus the bracket ends: an optimum at beta = 1 is
        # common and the midpoint alone never reaches it.
        cands = [(0.5 * (a + b), tau(0.5 * (a + b))), (b, tau(b)), (a, tau(a))]
        trace.extend(((e_th, x), v) for x, v in cands)
        beta, val = min(cands, key=lambda c: c[1])
        if val < best - TIE_TOL:
            best, best_policy = val, Threshold(e_th, beta)
    coop = not (isinstance(best_policy, Threshold) and best_policy.beta == 0.0
                and best_policy.e_th == n)
    return OptimizationResult(best_policy, best, coop, convention, trace, len(trace))


def throughput_optimal_dynamic(params: SystemParams, e_th: Optional[int] = None) -> Threshold:
    """Threshold policy that decodes whenever the relay is empty and ``q_e >= e_th``.

    Any ``e_th <= N - b_max + 1`` keeps the battery from overflowing and so
    reaches the static throughput bound.
    """
    bound = params.n_cap - params.b_max + 1
    if e_th is None:
        e_th = bound
    if e_th > bound or e_th < 0:
        raise InvalidThreshold(f"e_th={e_th} must lie in [0, N - b_max + 1 = {bound}]")
    return Threshold.at_least(e_th)
