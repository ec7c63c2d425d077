"""Delay and throughput analysis of a wireless-powered relay as a QBD process."""

__version__ = "0.1.0"

from .errors import (InvalidParams, InvalidThreshold, NoConvergence, NonAbsorbing,
                     SingularBoundary, SingularChain, Unstable, ValidationFailed)
from .model import (EnergyDistribution, State, Static, SystemParams, Tabular, Threshold,
                    load_config, mean_energy, table3_params, table4_params)
from .qbd_builder import build_blocks
from .qbd_solver import evaluate_static, solve_r, solve_static, static_metrics
from .finite_chain import solve_dynamic
from .optimizers import (alpha_t, compute_tn, noncoop_check, optimize_dynamic, optimize_static,
                         throughput_optimal_dynamic)
from .simulator import SimConfig, SimStats, run, run_policy_comparison

__all__ = [
    "InvalidParams", "InvalidThreshold", "NoConvergence", "NonAbsorbing", "SingularBoundary",
    "SingularChain", "Unstable", "ValidationFailed",
    "EnergyDistribution", "State", "Static", "SystemParams", "Tabular", "Threshold",
    "load_config", "mean_energy", "table3_params", "table4_params",
    "build_blocks", "evaluate_static", "solve_r", "solve_static", "static_metrics",
    "solve_dynamic",
    "alpha_t", "compute_tn", "noncoop_check", "optimize_dynamic", "optimize_static",
    "throughput_optimal_dynamic",
    "SimConfig", "SimStats", "run", "run_policy_comparison",
]
