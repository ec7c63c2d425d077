"""Energy-buffer transition matrices and QBD level blocks for a static policy.

Phases are energy levels ``q_e = 0..N``; levels are data-queue lengths.

By default the blocks are *energy gated*: the R-D success probability only
applies on slots where the relay actually transmits (``q_e >= K`` at the
start of the second subslot). With ``gated=False`` the textbook form is
used verbatim, where ``M`` multiplies ``p_R`` on every row including the
``q_e < K`` rows on which no transmission takes place. That form lets a
packet leave the relay without spending energy and breaks the stability
boundary, so it is kept only for auditing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SystemParams


@dataclass(frozen=True)
class EnergyMatrices:
    m_tx: np.ndarray       # second subslot, data backlogged
    t_harvest: np.ndarray  # first subslot, EH mode
    b_slot: np.ndarray     # whole slot: harvest then transmit


@dataclass(frozen=True)
class QbdBlocks:
    b00: np.ndarray
    b01: np.ndarray
    a_up: np.ndarray
    a_same: np.ndarray
    a_down: np.ndarray

    @property
    def size(self) -> int:
        return self.b00.shape[0]

    def scaled(self, w) -> "QbdBlocks":
        """Multiply every block row-wise by ``w`` (scalar or per-phase)."""
        w = np.asarray(w, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        return QbdBlocks(*(w * m for m in self.as_tuple()))

    def __add__(self, other: "QbdBlocks") -> "QbdBlocks":
        return QbdBlocks(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def as_tuple(self):
        return (self.b00, self.b01, self.a_up, self.a_same, self.a_down)

    def as_dict(self) -> dict:
        return dict(zip(("b00", "b01", "a_up", "a_same", "a_down"), self.as_tuple()))


def transmit_mask(params: SystemParams) -> np.ndarray:
    """Boolean vector: ``True`` where ``q_e >= K``."""
    return np.arange(params.n_cap + 1) >= params.k_cost


def build_m(params: SystemParams) -> np.ndarray:
    n, k = params.n_cap, params.k_cost
    m = np.zeros((n + 1, n + 1))
    i = np.arange(n + 1)
    m[i, np.where(i < k, i, i - k)] = 1.0
    return m


def build_t(params: SystemParams) -> np.ndarray:
    n = params.n_cap
    gam = params.energy.as_array()
    t = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        room = n - i
        head = gam[:room]
        t[i, i:i + len(head)] = head
        t[i, n] += gam[room:].sum()
    return t


def build_b(params: SystemParams) -> np.ndarray:
    return build_t(params) @ build_m(params)


def energy_matrices(params: SystemParams) -> EnergyMatrices:
    m = build_m(params)
    t = build_t(params)
    return EnergyMatrices(m_tx=m, t_harvest=t, b_slot=t @ m)


def overflow_per_slot(params: SystemParams) -> np.ndarray:
    """Expected units lost to a full buffer in one EH slot, per ``q_e``."""
    n = params.n_cap
    gam = params.energy.as_array()
    m = np.arange(len(gam))
    q = np.arange(n + 1)[:, None]
    return (np.maximum(q + m - n, 0) * gam).sum(axis=1)


def build_blocks(params: SystemParams, alpha: float, gated: bool = True) -> QbdBlocks:
    """QBD blocks for the static policy that decodes with probability ``alpha``."""
    ps, pr = params.p_det_s, params.p_det_r
    mats = energy_matrices(params)
    m, t = mats.m_tx, mats.t_harvest
    eye = np.eye(params.n_cap + 1)
    a = float(alpha)

    if not gated:
        b00 = a * (1 - ps) * pr * m + a * ps * eye + (1 - a) * t
        b01 = a * (1 - ps) * (1 - pr) * m
        a_same = a * ((1 - ps) * pr + ps * (1 - pr)) * m + (1 - a) * (1 - pr) * mats.b_slot
        a_down = a * ps * pr * m + (1 - a) * pr * mats.b_slot
        return QbdBlocks(b00, b01, b01.copy(), a_same, a_down)

    send = transmit_mask(params)[:, None] * m  # rows q_e >= K: drop K units
    hold = m - send                             # rows q_e < K: no attempt
    t_send = t @ send
    t_hold = t @ hold

    # Empty relay.  DD: D hears S (identity), or R stores the packet and
    # either delivers it at once, fails, or lacks energy to try.
    b00 = a * (1 - ps) * pr * send + a * ps * eye + (1 - a) * t
    b01 = a * (1 - ps) * ((1 - pr) * send + hold)

    # Backlogged relay.
    a_up = a * (1 - ps) * ((1 - pr) * send + hold)
    a_same = (
        a * ((1 - ps) * pr + ps * (1 - pr)) * send
        + a * ps * hold
        + (1 - a) * (1 - pr) * t_send
        + (1 - a) * t_hold
    )
    a_down = a * ps * pr * send + (1 - a) * pr * t_send
    return QbdBlocks(b00, b01, a_up, a_same, a_down)


def mode_blocks(params: SystemParams, gated: bool = True) -> tuple:
    """``(dd, eh)``: blocks under pure DD and pure EH mode.

    Any per-state mix is ``dd.scaled(alpha) + eh.scaled(1 - alpha)`` since
    the mode only changes which row distribution is drawn from.
    """
    return build_blocks(params, 1.0, gated), build_blocks(params, 0.0, gated)
