"""System parameters, relay states and time-switching policies.

Every object here is an immutable value. Construction validates, so a
``SystemParams`` instance that exists always satisfies ``b_max <= K`` and
``N >= 2K``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Union

import numpy as np

from .errors import InvalidParams

PROB_TOL = 1e-12


def _check_prob(name: str, p: float, *, open_low=False, open_high=False):
    if not math.isfinite(p):
        raise InvalidParams(f"{name} must be finite, got {p!r}")
    low_ok = p > 0 if open_low else p >= 0
    high_ok = p < 1 if open_high else p <= 1
    if not (low_ok and high_ok):
        lo = "(" if open_low else "["
        hi = ")" if open_high else "]"
        raise InvalidParams(f"{name}={p!r} outside {lo}0, 1{hi}")


@dataclass(frozen=True)
class EnergyDistribution:
    """Distribution of energy units harvested in one EH slot.

    ``probs[m]`` is the probability of harvesting ``m`` units, for
    ``m = 0..b_max``.
    """

    probs: tuple

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) < 2:
            raise InvalidParams("energy distribution needs b_max >= 1")
        if any(not math.isfinite(p) or p < 0 for p in probs):
            raise InvalidParams(f"energy probabilities must be >= 0: {probs}")
        total = math.fsum(probs)
        if abs(total - 1.0) > PROB_TOL:
            raise InvalidParams(f"energy probabilities sum to {total!r}, not 1")

    @classmethod
    def uniform(cls, b_max: int) -> "EnergyDistribution":
        """Discrete uniform on ``{0, ..., b_max}``."""
        if int(b_max) != b_max or b_max < 1:
            raise InvalidParams(f"b_max must be an integer >= 1, got {b_max!r}")
        b_max = int(b_max)
        return cls(tuple([1.0 / (b_max + 1)] * (b_max + 1)))

    @property
    def b_max(self) -> int:
        return len(self.probs) - 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    @property
    def mean(self) -> float:
        return mean_energy(self)


def mean_energy(dist: EnergyDistribution) -> float:
    """Expected number of units harvested per EH slot."""
    return math.fsum(m * p for m, p in enumerate(dist.probs))


@dataclass(frozen=True)
class SystemParams:
    """Channel, battery and harvesting parameters of the three-node network.

    Attributes
    ----------
    p_det_s, p_det_r : float
        Detection probabilities of the S-D and R-D links.
    k_cost : int
        Energy units spent per relay transmission attempt (K).
    n_cap : int
        Energy buffer capacity in units (N).
    energy : EnergyDistribution
        Harvest distribution in EH mode.
    """

    p_det_s: float
    p_det_r: float
    k_cost: int
    n_cap: int
    energy: EnergyDistribution

    def __post_init__(self):
        validate(self)

    @property
    def b_max(self) -> int:
        return self.energy.b_max

    @property
    def mean_energy(self) -> float:
        return mean_energy(self.energy)

    @property
    def n_states(self) -> int:
        """Number of energy phases, ``N + 1``."""
        return self.n_cap + 1

    def replace(self, **changes) -> "SystemParams":
        fields = dict(
            p_det_s=self.p_det_s,
            p_det_r=self.p_det_r,
            k_cost=self.k_cost,
            n_cap=self.n_cap,
            energy=self.energy,
        )
        fields.update(changes)
        return SystemParams(**fields)

    def to_dict(self) -> dict:
        return {
            "p_det_s": self.p_det_s,
            "p_det_r": self.p_det_r,
            "k_cost": self.k_cost,
            "n_cap": self.n_cap,
            "energy": {"probs": list(self.energy.probs)},
        }


def validate(params: SystemParams) -> None:
    """Raise ``InvalidParams`` naming the first violated constraint."""
    _check_prob("p_det_s", params.p_det_s, open_low=True, open_high=True)
    _check_prob("p_det_r", params.p_det_r, open_low=True)
    if not isinstance(params.energy, EnergyDistribution):
        raise InvalidParams("energy must be an EnergyDistribution")
    for name in ("k_cost", "n_cap"):
        v = getattr(params, name)
        if isinstance(v, bool) or int(v) != v:
            raise InvalidParams(f"{name} must be an integer, got {v!r}")
    if params.k_cost < 1:
        raise InvalidParams(f"k_cost must be >= 1, got {params.k_cost}")
    if params.energy.b_max > params.k_cost:
        raise InvalidParams(
            f"b_max > K ({params.energy.b_max} > {params.k_cost})"
        )
    if params.n_cap < 2 * params.k_cost:
        raise InvalidParams(f"N < 2K ({params.n_cap} < {2 * params.k_cost})")


@dataclass(frozen=True)
class State:
    """Relay state at the start of a slot: data packets and energy units."""

    q_d: int
    q_e: int

    def __post_init__(self):
        if self.q_d < 0 or self.q_e < 0:
            raise InvalidParams(f"negative state component in {self}")

    def check(self, params: SystemParams) -> None:
        if self.q_e > params.n_cap:
            raise InvalidParams(f"q_e={self.q_e} exceeds N={params.n_cap}")


# Policies.  ``alpha_table`` gives per-(q_d, q_e) DD probabilities; the last
# row applies to every larger q_d.


@dataclass(frozen=True)
class Static:
    alpha: float

    def __post_init__(self):
        _check_prob("alpha", self.alpha)

    def dd_probability(self, s: State) -> float:
        return float(self.alpha)

    def alpha_table(self, n_cap: int) -> np.ndarray:
        return np.full((1, n_cap + 1), float(self.alpha))

    def to_json(self):
        return {"static": self.alpha}


@dataclass(frozen=True)
class Threshold:
    """Decode with probability 1 above ``e_th``, ``beta`` at ``e_th``, else 0.

    Only an empty relay (``q_d == 0``) ever decodes, so at most one packet
    is held at the relay.
    """

    e_th: int
    beta: float = 1.0

    def __post_init__(self):
        if isinstance(self.e_th, bool) or int(self.e_th) != self.e_th or self.e_th < 0:
            raise InvalidParams(f"e_th must be a non-negative integer, got {self.e_th!r}")
        object.__setattr__(self, "e_th", int(self.e_th))
        _check_prob("beta", self.beta)

    @classmethod
    def at_least(cls, threshold: int) -> "Threshold":
        """Decode whenever the relay is empty and ``q_e >= threshold``."""
        return cls(threshold, 1.0)

    def dd_probability(self, s: State) -> float:
        if s.q_d != 0:
            return 0.0
        if s.q_e > self.e_th:
            return 1.0
        if s.q_e == self.e_th:
            return float(self.beta)
        return 0.0

    def level0(self, n_cap: int) -> np.ndarray:
        if self.e_th > n_cap:
            raise InvalidParams(f"e_th={self.e_th} exceeds N={n_cap}")
        a = np.zeros(n_cap + 1)
        a[self.e_th + 1:] = 1.0
        a[self.e_th] = self.beta
        return a

    def alpha_table(self, n_cap: int) -> np.ndarray:
        return np.vstack([self.level0(n_cap), np.zeros(n_cap + 1)])

    def to_json(self):
        return {"threshold": {"e_th": self.e_th, "beta": self.beta}}


@dataclass(frozen=True)
class Tabular:
    """Arbitrary state-dependent policy; ``table[q_d][q_e]``.

    Rows beyond the table mean "never decode".
    """

    table: tuple

    def __post_init__(self):
        rows = tuple(tuple(float(a) for a in row) for row in self.table)
        if not rows:
            raise InvalidParams("tabular policy needs at least one row")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise InvalidParams("tabular policy rows must share one length")
        for r in rows:
            for a in r:
                _check_prob("tabular alpha", a)
        object.__setattr__(self, "table", rows)

    @property
    def max_qd(self) -> int:
        return len(self.table) - 1

    def dd_probability(self, s: State) -> float:
        if s.q_d >= len(self.table):
            return 0.0
        return self.table[s.q_d][s.q_e]

    def level0(self, n_cap: int) -> np.ndarray:
        return self.alpha_table(n_cap)[0]

    def alpha_table(self, n_cap: int) -> np.ndarray:
        if len(self.table[0]) != n_cap + 1:
            raise InvalidParams(
                f"tabular rows have {len(self.table[0])} entries, need N+1={n_cap + 1}"
            )
        return np.vstack([np.asarray(self.table, dtype=float), np.zeros(n_cap + 1)])

    def to_json(self):
        return {"tabular": [list(r) for r in self.table]}


Policy = Union[Static, Threshold, Tabular]


def dd_probability(policy: Policy, s: State) -> float:
    """Probability that the relay picks DD mode in state ``s``."""
    return policy.dd_probability(s)


# -- config -----------------------------------------------------------------


def energy_from_json(obj: Mapping[str, Any]) -> EnergyDistribution:
    if not isinstance(obj, Mapping) or len(obj) != 1:
        raise InvalidParams(f"energy must be {{'uniform': int}} or {{'probs': [...]}}, got {obj!r}")
    if "uniform" in obj:
        return EnergyDistribution.uniform(obj["uniform"])
    if "probs" in obj:
        return EnergyDistribution(tuple(obj["probs"]))
    raise InvalidParams(f"unknown energy spec {obj!r}")


def policy_from_json(obj: Mapping[str, Any]) -> Policy:
    if not isinstance(obj, Mapping) or len(obj) != 1:
        raise InvalidParams(f"policy must have exactly one key, got {obj!r}")
    (kind, val), = obj.items()
    if kind == "static":
        return Static(float(val))
    if kind == "threshold":
        return Threshold(val["e_th"], float(val.get("beta", 1.0)))
    if kind == "tabular":
        return Tabular(tuple(tuple(r) for r in val))
    raise InvalidParams(f"unknown policy kind {kind!r}")


def params_from_json(obj: Mapping[str, Any]) -> SystemParams:
    try:
        return SystemParams(
            p_det_s=float(obj["p_det_s"]),
            p_det_r=float(obj["p_det_r"]),
            k_cost=obj["k_cost"],
            n_cap=obj["n_cap"],
            energy=energy_from_json(obj["energy"]),
        )
    except KeyError as exc:
        raise InvalidParams(f"missing config field {exc.args[0]!r}") from None
    except TypeError as exc:
        raise InvalidParams(str(exc)) from None


def load_config(path) -> tuple:
    """Read a JSON config; returns ``(params, policy_or_None, raw_dict)``."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidParams(f"cannot read config {path}: {exc}") from None
    params = params_from_json(raw)
    policy = policy_from_json(raw["policy"]) if "policy" in raw else None
    return params, policy, raw


def table3_params(p_det_r: float = 0.9) -> SystemParams:
    """Reference set: p_S=0.3, K=10, N=100, uniform arrivals on 0..5."""
    return SystemParams(0.3, p_det_r, 10, 100, EnergyDistribution.uniform(5))


def table4_params(p_det_r: float) -> SystemParams:
    return SystemParams(0.3, p_det_r, 15, 45, EnergyDistribution.uniform(7))
