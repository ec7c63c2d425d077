"""Slot loop of the three-node protocol.

Random inputs are drawn outside the kernel, so the jitted and pure-Python
paths consume identical numbers and return identical results.
"""
import numpy as np

from ._accel import njit

# state vector
S_QD, S_QE, S_HOL, S_HEAD = 0, 1, 2, 3

# whole-run counters (warmup included)
C_HARVEST, C_BLOCKED, C_CONSUMED, C_S_DEPART, C_DIRECT, C_STORED, C_RELAYED, C_MAX_QD = range(8)
N_COUNTERS = 8

# per-batch accumulators (measurement window only)
A_SLOTS, A_QD, A_DD, A_ACTIVE, A_OFFERED, A_BLOCKED, A_DELIV, A_DELAY, A_DELAY_SUB, A_RELAYED = range(10)
N_ACC = 10

# trace flags
F_DD, F_DIRECT, F_STORED, F_ATTEMPT, F_RELAY_OK = 1, 2, 4, 8, 16


@njit
def run_slots(alpha_tab, k_cost, n_cap, p_s, p_r,
              u_mode, u_sd, u_rd, gamma,
              t0, warmup, batch_len,
              state, fifo, counters, acc, trace):
    """Advance ``len(u_mode)`` slots starting at global slot ``t0``.

    ``fifo`` is a ring buffer of head-of-line start slots for the packets
    held at R; the caller guarantees room for this chunk.
    """
    n_rows = alpha_tab.shape[0]
    cap = fifo.shape[0]
    q_d = state[S_QD]
    q_e = state[S_QE]
    hol = state[S_HOL]
    head = state[S_HEAD]
    want_trace = trace.shape[0] > 0
    for i in range(u_mode.shape[0]):
        t = t0 + i
        row = q_d if q_d < n_rows else n_rows - 1
        dd = u_mode[i] < alpha_tab[row, q_e]
        meas = t >= warmup
        b = 0
        if meas:
            b = (t - warmup) // batch_len
            acc[b, A_SLOTS] += 1.0
            acc[b, A_QD] += q_d
            if dd:
                acc[b, A_DD] += 1.0
        flags = F_DD if dd else 0
        qd0 = q_d
        qe0 = q_e
        blocked = 0

        # subslot 1: S transmits; D's ACK preempts relay storage
        if u_sd[i] < p_s:
            counters[C_S_DEPART] += 1
            counters[C_DIRECT] += 1
            flags |= F_DIRECT
            if meas:
                d = t - hol + 1
                acc[b, A_DELIV] += 1.0
                acc[b, A_DELAY] += d
                acc[b, A_DELAY_SUB] += d
            hol = t + 1
        elif dd:
            fifo[(head + q_d) % cap] = hol
            q_d += 1
            counters[C_S_DEPART] += 1
            counters[C_STORED] += 1
            flags |= F_STORED
            hol = t + 1
        if not dd:
            g = gamma[i]
            room = n_cap - q_e
            add = g if g < room else room
            blocked = g - add
            q_e += add
            counters[C_HARVEST] += g
            counters[C_BLOCKED] += blocked
            if meas:
                acc[b, A_OFFERED] += g
                acc[b, A_BLOCKED] += blocked

        # subslot 2: R transmits its head-of-line packet if it can pay K
        if q_d >= 1 and q_e >= k_cost:
            q_e -= k_cost
            counters[C_CONSUMED] += k_cost
            flags |= F_ATTEMPT
            if meas:
                acc[b, A_ACTIVE] += 1.0
            if u_rd[i] < p_r:
                start = fifo[head]
                head = (head + 1) % cap
                q_d -= 1
                counters[C_RELAYED] += 1
                flags |= F_RELAY_OK
                if meas:
                    d = t - start + 1
                    acc[b, A_DELIV] += 1.0
                    acc[b, A_DELAY] += d
                    acc[b, A_DELAY_SUB] += d + 0.5
                    acc[b, A_RELAYED] += 1.0
        if q_d > counters[C_MAX_QD]:
            counters[C_MAX_QD] = q_d
        if want_trace and i < trace.shape[0]:
            trace[i, 0] = t
            trace[i, 1] = qd0
            trace[i, 2] = qe0
            trace[i, 3] = flags
            trace[i, 4] = blocked
            trace[i, 5] = q_d
            trace[i, 6] = q_e
    state[S_QD] = q_d
    state[S_QE] = q_e
    state[S_HOL] = hol
    state[S_HEAD] = head


def empty_trace():
    return np.zeros((0, 7), dtype=np.int64)
