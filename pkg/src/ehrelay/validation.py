"""Analytic-versus-simulation cross checks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .errors import ValidationFailed
from .finite_chain import solve_dynamic
from .model import Policy, Static, SystemParams
from .optimizers import alpha_t, optimize_dynamic
from .qbd_solver import evaluate_static
from .simulator import SimConfig, run

DEFAULT_TOL = 0.02
DEFAULT_ALPHAS = (0.05, 0.10, 0.15, 0.20)


@dataclass(frozen=True)
class ValidationRow:
    case: str
    metric: str
    analytic: float
    simulated: float
    simulated_se: float

    @property
    def rel_dev(self) -> float:
        return abs(self.simulated - self.analytic) / abs(self.analytic)

    def as_dict(self, tol: float) -> dict:
        return {
            "case": self.case, "metric": self.metric, "analytic": self.analytic,
            "simulated": self.simulated, "simulated_se": self.simulated_se,
            "rel_dev": self.rel_dev, "ok": self.rel_dev < tol,
        }


@dataclass
class ValidationReport:
    rows: list
    tol: float
    seed: int

    @property
    def max_rel_dev(self) -> float:
        return max((r.rel_dev for r in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        return all(r.rel_dev < self.tol for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if r.rel_dev >= self.tol]

    def raise_if_failed(self) -> None:
        if not self.passed:
            raise ValidationFailed([r.as_dict(self.tol) for r in self.failures()])


StaticSolver = Callable[[SystemParams, float], tuple]


def validate(params: SystemParams, alphas: Sequence[float] = DEFAULT_ALPHAS,
             config: SimConfig = SimConfig(), tol: float = DEFAULT_TOL,
             include_dynamic: bool = True,
             static_solver: StaticSolver = evaluate_static,
             dynamic_policy: Optional[Policy] = None) -> ValidationReport:
    """Compare delay and throughput from the analysis against simulation.

    Only stable grid points are simulated. ``static_solver`` is injectable
    so a deliberately broken solver can serve as a negative control.
    """
    rows = []
    hi = alpha_t(params)
    for a in alphas:
        if a >= hi:
            continue
        _, m = static_solver(params, a)
        if m is None:
            continue
        s = run(params, Static(a), config)
        case = f"static alpha={a:g}"
        rows.append(ValidationRow(case, "delay", m.delay, s.mean_delay.mean, s.mean_delay.se))
        rows.append(ValidationRow(case, "throughput", m.throughput, s.throughput.mean,
                                  s.throughput.se))
    if include_dynamic:
        pol = dynamic_policy or optimize_dynamic(params).best_policy
        sol = solve_dynamic(params, pol)
        s = run(params, pol, config)
        case = f"dynamic {pol.to_json()}"
        rows.append(ValidationRow(case, "delay", sol.delay, s.mean_delay_subslot.mean,
                                  s.mean_delay_subslot.se))
        rows.append(ValidationRow(case, "throughput", sol.throughput, s.throughput.mean,
                                  s.throughput.se))
    return ValidationReport(rows, tol, config.seed)
