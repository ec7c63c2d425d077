"""Matrix-analytic solution of the homogeneous QBD under a static policy.

The stationary distribution has the level-geometric form
``pi_l = pi_1 R^(l-1)`` for ``l >= 1``, where ``R`` is the minimal
non-negative solution of ``R = A_up + R A_same + R^2 A_down``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NoConvergence, SingularBoundary, Unstable
from .model import SystemParams
from .qbd_builder import QbdBlocks, build_blocks, build_t, overflow_per_slot, transmit_mask

STABILITY_MARGIN = 1e-9
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10**6


@dataclass(frozen=True)
class QbdSolution:
    r_matrix: np.ndarray
    pi0: Optional[np.ndarray]
    pi1: Optional[np.ndarray]
    spectral_radius: float
    drift: float
    stable: bool
    mean_qd: float
    mean_qd_level0_form: float
    iterations: int

    def level(self, l: int) -> np.ndarray:
        """Stationary mass over phases at level ``l``."""
        if not self.stable:
            raise Unstable("no stationary distribution")
        if l == 0:
            return self.pi0
        return self.pi1 @ np.linalg.matrix_power(self.r_matrix, l - 1)

    def phase_marginal_backlogged(self) -> np.ndarray:
        """``sum_{l>=1} pi_l`` over phases."""
        n = self.r_matrix.shape[0]
        return np.linalg.solve((np.eye(n) - self.r_matrix).T, self.pi1)


@dataclass(frozen=True)
class StaticMetrics:
    p_active: float
    p_block: float
    throughput: float
    delay: float
    delay_subslot: float
    delay_at_r: float
    rate_in_d: float
    rate_out_d: float
    rate_in_e: float
    rate_out_e: float


def solve_r(blocks: QbdBlocks, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
            method: str = "natural"):
    """Minimal non-negative rate matrix by fixed-point iteration from zero.

    ``method="natural"`` iterates ``R <- A_up + R A_same + R^2 A_down``;
    ``method="traditional"`` iterates ``R <- A_up (I - A_same - R A_down)^-1``,
    which converges to the same matrix in fewer (but dearer) steps.

    Returns ``(R, iterations)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    up, same, down = blocks.a_up, blocks.a_same, blocks.a_down
    n = up.shape[0]
    r = np.zeros((n, n))
    if not up.any():
        return r, 1
    eye = np.eye(n)
    step = math.inf
    for it in range(1, max_iter + 1):
        if method == "natural":
            r_new = up + r @ same + (r @ r) @ down
        elif method == "traditional":
            r_new = np.linalg.solve((eye - same - r @ down).T, up.T).T
        else:
            raise ValueError(f"unknown method {method!r}")
        step = np.abs(r_new - r).max()
        r = r_new
        if step < tol:
            return r, it
    raise NoConvergence(max_iter, step)


def spectral_radius(mat: np.ndarray, tol: float = 1e-12, max_iter: int = 20_000,
                    seed: int = 12345) -> float:
    """Perron root of a non-negative matrix by power iteration.

    Falls back to a dense eigenvalue solve when the iteration stalls
    (e.g. a near-degenerate subdominant eigenvalue).
    """
    n = mat.shape[0]
    if not mat.any():
        return 0.0
    x = np.random.default_rng(seed).uniform(0.5, 1.5, n)
    x /= np.abs(x).sum()
    lam = 0.0
    for _ in range(max_iter):
        y = mat @ x
        norm = np.abs(y).sum()
        if norm == 0.0:
            return 0.0
        y /= norm
        if abs(norm - lam) <= tol * max(norm, 1e-300) and np.abs(y - x).max() < 1e-10:
            return float(norm)
        lam, x = norm, y
    return float(np.abs(np.linalg.eigvals(mat)).max())


def mean_drift(blocks: QbdBlocks) -> float:
    """Mean level increment per slot of an always-backlogged relay.

    Negative iff the QBD is positive recurrent.
    """
    a = blocks.a_up + blocks.a_same + blocks.a_down
    n = a.shape[0]
    lhs = (a - np.eye(n)).T.copy()
    lhs[-1] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    phase = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    return float(phase @ (blocks.a_up.sum(axis=1) - blocks.a_down.sum(axis=1)))


def solve_boundary(blocks: QbdBlocks, r_matrix: np.ndarray, check_tol: float = 1e-8):
    """Stationary vectors of levels 0 and 1 given the rate matrix."""
    n = r_matrix.shape[0]
    if spectral_radius(r_matrix) >= 1 - STABILITY_MARGIN:
        raise Unstable("spectral radius of R is not below 1")
    eye = np.eye(n)
    # Unknown row vector x = [pi0, pi1]; x @ P = x.
    p = np.block([
        [blocks.b00, blocks.b01],
        [blocks.a_down, blocks.a_same + r_matrix @ blocks.a_down],
    ])
    lhs = (p - np.eye(2 * n)).T
    norm_row = np.concatenate([np.ones(n), np.linalg.solve(eye - r_matrix, np.ones(n))])
    lhs[0] = norm_row
    rhs = np.zeros(2 * n)
    rhs[0] = 1.0
    try:
        x = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularBoundary(str(exc)) from None
    resid = np.abs(x @ p - x).max()
    if not np.isfinite(x).all() or resid > check_tol or x.min() < -check_tol:
        raise SingularBoundary(f"boundary solve residual {resid:.2e}, min entry {x.min():.2e}")
    x = np.clip(x, 0.0, None)
    return x[:n], x[n:]


def mean_queue_length(pi0, pi1, r_matrix) -> float:
    """``sum_l l * pi_l 1`` in closed form, ``pi_1 (I - R)^-2 1``."""
    n = r_matrix.shape[0]
    v = np.linalg.solve(np.eye(n) - r_matrix, np.ones(n))
    return float(pi1 @ np.linalg.solve(np.eye(n) - r_matrix, v))


def mean_queue_length_level0_form(pi0, r_matrix) -> float:
    """``pi_0 R (I - R)^-2 1``: geometric from level 0 rather than level 1.

    Only exact when level 0 shares the repeating block structure; kept for
    comparison with the boundary-aware form.
    """
    n = r_matrix.shape[0]
    v = np.linalg.solve(np.eye(n) - r_matrix, np.ones(n))
    v = np.linalg.solve(np.eye(n) - r_matrix, v)
    return float(pi0 @ r_matrix @ v)


def solve_static(params: SystemParams, alpha: float, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, method: str = "natural",
                 gated: bool = True) -> QbdSolution:
    blocks = build_blocks(params, alpha, gated)
    r, its = solve_r(blocks, tol, max_iter, method)
    rho = spectral_radius(r)
    drift = mean_drift(blocks)
    stable = rho < 1 - STABILITY_MARGIN and drift < 0
    if not stable:
        return QbdSolution(r, None, None, rho, drift, False, math.inf, math.inf, its)
    pi0, pi1 = solve_boundary(blocks, r)
    return QbdSolution(
        r_matrix=r,
        pi0=pi0,
        pi1=pi1,
        spectral_radius=rho,
        drift=drift,
        stable=True,
        mean_qd=mean_queue_length(pi0, pi1, r),
        mean_qd_level0_form=mean_queue_length_level0_form(pi0, r),
        iterations=its,
    )


def static_metrics(params: SystemParams, alpha: float, solution: QbdSolution) -> StaticMetrics:
    """Throughput, delay and buffer rates of a solved static policy."""
    if not solution.stable:
        raise Unstable(f"alpha={alpha} is beyond the stability boundary")
    ps, pr, k = params.p_det_s, params.p_det_r, params.k_cost
    send = transmit_mask(params).astype(float)
    reach_k = build_t(params) @ send          # P(min(q_e + G, N) >= K)
    pi0 = solution.pi0
    busy = solution.phase_marginal_backlogged()

    p_active = alpha * (1 - ps) * (pi0 @ send) + busy @ (alpha * send + (1 - alpha) * reach_k)
    offered = (1 - alpha) * params.mean_energy
    lost = (1 - alpha) * ((pi0 + busy) @ overflow_per_slot(params))
    p_block = lost / offered if offered > 0 else 0.0

    throughput = ps + p_active * pr
    rate_in_d = alpha * (1 - ps)
    delay = (solution.mean_qd + 1) / throughput
    delay_subslot = (solution.mean_qd + 0.5 * rate_in_d + 1) / throughput
    if rate_in_d > 0:
        delay_at_r = solution.mean_qd / rate_in_d
    else:
        from .optimizers import compute_tn  # α -> 0 limit: empty relay, full battery
        delay_at_r = compute_tn(params) - 1.0
    return StaticMetrics(
        p_active=float(p_active),
        p_block=float(p_block),
        throughput=float(throughput),
        delay=float(delay),
        delay_subslot=float(delay_subslot),
        delay_at_r=float(delay_at_r),
        rate_in_d=float(rate_in_d),
        rate_out_d=float(p_active * pr),
        rate_in_e=float(offered - lost),
        rate_out_e=float(p_active * k),
    )


def evaluate_static(params: SystemParams, alpha: float, **kw):
    """Solve and compute metrics; ``metrics`` is ``None`` when unstable."""
    sol = solve_static(params, alpha, **kw)
    return sol, (static_metrics(params, alpha, sol) if sol.stable else None)
