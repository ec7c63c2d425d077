"""Command-line front end: sweeps, optimizations, simulation and validation.

Every artifact starts with a ``# {json}`` header carrying the parameters
and effective seed. Exit codes: 0 ok, 2 invalid config, 3 no convergence,
4 validation failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .errors import InvalidParams, NoConvergence, ValidationFailed
from .model import Static, SystemParams, load_config, table3_params, table4_params
from .optimizers import alpha_t, optimize_dynamic, optimize_static
from .qbd_builder import build_blocks
from .qbd_solver import DEFAULT_MAX_ITER, DEFAULT_TOL, evaluate_static
from .simulator import SimConfig, run
from .validation import DEFAULT_ALPHAS, validate

log = logging.getLogger("ehrelay")

EXIT_OK, EXIT_CONFIG, EXIT_NO_CONVERGENCE, EXIT_VALIDATION = 0, 2, 3, 4
TABLE4_PR = (0.45, 0.5, 0.6, 0.7, 0.8, 0.9)
DEFAULT_SEED = 2024


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(float(x), ".12g")
    return str(x)


def write_csv(rows: Sequence[dict], header: dict, out: Optional[str]) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: fmt(v) for k, v in r.items()})
    text = buf.getvalue()
    _emit(text, out)
    return text


def write_json(obj: dict, out: Optional[str]) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    _emit(text, out)
    return text


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def read_csv(path_or_text) -> tuple:
    """Parse an artifact written by ``write_csv``; returns ``(header, rows)``."""
    text = Path(path_or_text).read_text() if isinstance(path_or_text, Path) else path_or_text
    first, _, rest = text.partition("\n")
    if not first.startswith("# "):
        raise ValueError("missing JSON header line")
    return json.loads(first[2:]), list(csv.DictReader(io.StringIO(rest)))


# -- helpers ----------------------------------------------------------------


def _alpha_grid(raw: dict) -> list:
    g = raw.get("alphas")
    if g is None:
        g = {"start": 0.0, "stop": 0.3, "step": 0.01}
    if isinstance(g, dict):
        n = int(round((g["stop"] - g["start"]) / g["step"]))
        g = [round(g["start"] + i * g["step"], 12) for i in range(n + 1)]
    g = [float(a) for a in g]
    if not g:
        raise InvalidParams("alpha grid is empty")
    if any(not 0.0 <= a < 1.0 for a in g):
        raise InvalidParams("alpha grid must lie in [0, 1)")
    return g


def _solver_kw(raw: dict) -> dict:
    return {"tol": float(raw.get("tol", DEFAULT_TOL)),
            "max_iter": int(raw.get("max_iter", DEFAULT_MAX_ITER)),
            "method": raw.get("r_method", "natural")}


def _sim_config(args, raw: dict) -> SimConfig:
    sim = raw.get("sim", {})
    try:
        return SimConfig(
            slots=int(args.slots or sim.get("slots", 1_000_000)),
            warmup=int(sim.get("warmup", 10_000)),
            seed=int(args.seed if args.seed is not None else sim.get("seed", DEFAULT_SEED)),
            replications=int(sim.get("replications", 1)),
            batches=int(sim.get("batches", 20)),
            parallel=int(args.parallel),
        )
    except ValueError as exc:
        raise InvalidParams(str(exc)) from None


def _header(command: str, params: Optional[SystemParams], seed, **extra) -> dict:
    h = {"command": command, "version": __version__, "seed": seed}
    if params is not None:
        h["params"] = params.to_dict()
    h.update(extra)
    return h


def _dump_blocks(params: SystemParams, alpha: float, out: Optional[str]) -> None:
    base = Path(out).with_suffix("") if out else Path("matrices")
    base = Path(f"{base}_matrices")
    base.mkdir(parents=True, exist_ok=True)
    for name, mat in build_blocks(params, alpha).as_dict().items():
        np.savetxt(base / f"alpha_{alpha:.6g}_{name}.csv", mat, delimiter=",", fmt="%.12g")


def _sweep_point(params: SystemParams, alpha: float, solver_kw: dict, sim: Optional[SimConfig]):
    sol, m = evaluate_static(params, alpha, **solver_kw)
    row = {"alpha": alpha, "stable": sol.stable, "spectral_radius": sol.spectral_radius,
           "iterations": sol.iterations}
    if m is None:
        row.update(throughput=math.nan, delay=math.nan, delay_subslot=math.nan,
                   p_active=math.nan, p_block=math.nan, mean_qd=math.nan,
                   mean_qd_level0_form=math.nan)
    else:
        row.update(throughput=m.throughput, delay=m.delay, delay_subslot=m.delay_subslot,
                   p_active=m.p_active, p_block=m.p_block, mean_qd=sol.mean_qd,
                   mean_qd_level0_form=sol.mean_qd_level0_form)
    if sim is not None:
        if sol.stable:
            s = run(params, Static(alpha), sim)
            row.update(sim_throughput=s.throughput.mean, sim_throughput_se=s.throughput.se,
                       sim_delay=s.mean_delay.mean, sim_delay_se=s.mean_delay.se,
                       sim_p_block=s.p_block, sim_mean_qd=s.mean_qd.mean)
        else:
            row.update(sim_throughput=math.nan, sim_throughput_se=math.nan, sim_delay=math.nan,
                       sim_delay_se=math.nan, sim_p_block=math.nan, sim_mean_qd=math.nan)
    return row


def _map(fn, items: Iterable, parallel: int) -> list:
    items = list(items)
    if parallel > 1 and len(items) > 1:
        with ProcessPoolExecutor(parallel) as ex:
            return list(ex.map(fn, *zip(*items)))
    return [fn(*it) for it in items]


def _table4_row(p_r: float, eps: float):
    params = table4_params(p_r)
    res = optimize_dynamic(params, eps=eps)
    pol = res.best_policy
    return {"p_det_r": p_r, "e_th": pol.e_th, "beta": pol.beta, "delay": res.objective,
            "cooperation": res.cooperation, "evaluations": res.evaluations}


# -- commands ---------------------------------------------------------------


def cmd_sweep_static(args, params, policy, raw) -> int:
    grid = _alpha_grid(raw)
    kw = _solver_kw(raw)
    sim = _sim_config(args, raw) if raw.get("simulate") else None
    if args.dump_matrices:
        for a in grid:
            _dump_blocks(params, a, args.out)
    rows = _map(_sweep_point, [(params, a, kw, sim) for a in grid], args.parallel)
    write_csv(rows, _header("sweep-static", params, sim.seed if sim else None,
                            alpha_t=alpha_t(params)), args.out)
    return EXIT_OK


def cmd_optimize_static(args, params, policy, raw) -> int:
    res = optimize_static(params, eps=args.eps, convention=raw.get("convention", "slot"),
                          **_solver_kw(raw))
    out = _header("optimize-static", params, None, alpha_t=alpha_t(params))
    out["result"] = res.to_json()
    write_json(out, args.out)
    return EXIT_OK


def cmd_optimize_dynamic(args, params, policy, raw) -> int:
    res = optimize_dynamic(params, eps=args.eps, convention=raw.get("convention", "subslot"))
    out = _header("optimize-dynamic", params, None)
    out["result"] = res.to_json()
    write_json(out, args.out)
    return EXIT_OK


def cmd_simulate(args, params, policy, raw) -> int:
    if policy is None:
        raise InvalidParams("simulate needs a 'policy' entry in the config")
    cfg = _sim_config(args, raw)
    stats = run(params, policy, cfg)
    row = {"policy": json.dumps(policy.to_json())}
    row.update(stats.summary())
    write_csv([row], _header("simulate", params, cfg.seed, slots=cfg.slots,
                             warmup=cfg.warmup, replications=cfg.replications), args.out)
    return EXIT_OK


def cmd_validate(args, params, policy, raw) -> int:
    cfg = _sim_config(args, raw)
    alphas = [float(a) for a in raw.get("alphas", DEFAULT_ALPHAS)]
    report = validate(params, alphas, cfg, include_dynamic=raw.get("dynamic", True))
    rows = [r.as_dict(report.tol) for r in report.rows]
    write_csv(rows, _header("validate", params, cfg.seed, max_rel_dev=report.max_rel_dev,
                            passed=report.passed, tol=report.tol), args.out)
    report.raise_if_failed()
    return EXIT_OK


def cmd_table4(args, params, policy, raw) -> int:
    rows = _map(_table4_row, [(p, args.eps) for p in TABLE4_PR], args.parallel)
    write_csv(rows, _header("table4", None, None, eps=args.eps), args.out)
    return EXIT_OK


COMMANDS = {
    "sweep-static": cmd_sweep_static,
    "optimize-static": cmd_optimize_static,
    "optimize-dynamic": cmd_optimize_dynamic,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "table4": cmd_table4,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ehrelay", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON file with params (and policy / grid / sim fields)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--slots", type=int, default=None)
    p.add_argument("--eps", type=float, default=0.01, help="relative search tolerance")
    p.add_argument("--parallel", type=int, default=1, help="worker processes")
    p.add_argument("--dump-matrices", action="store_true",
                   help="write the QBD blocks of every grid point as CSV")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.parallel < 1 or args.eps <= 0:
            raise InvalidParams("--parallel must be >= 1 and --eps positive")
        if args.config:
            params, policy, raw = load_config(args.config)
        else:
            params, policy, raw = table3_params(), None, {}
        return COMMANDS[args.command](args, params, policy, raw)
    except InvalidParams as exc:
        log.error("invalid config: %s", exc)
        return EXIT_CONFIG
    except NoConvergence as exc:
        log.error("%s", exc)
        return EXIT_NO_CONVERGENCE
    except ValidationFailed as exc:
        log.error("validation failed: %s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
