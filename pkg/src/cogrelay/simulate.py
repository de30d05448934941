"""Slot-level Monte Carlo simulation of the cognitive relaying MAC protocol.

The simulator is the independent oracle for every closed-form rate: it plays
the per-slot protocol (primary transmission, NACK-triggered decode/accept
ladder, ordered or random secondary access, dummy-packet injection for the
decoupled variants) against pre-drawn uniforms. Each slot consumes a fixed
layout of 16 uniforms regardless of the system state, so two runs with the
same seed share their randomness draw-for-draw; this is what makes pathwise
dominance comparisons meaningful.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .model import Access, Policy, Scheme, SystemConfig

__all__ = [
    "QueueStats",
    "SimStats",
    "Verdict",
    "dominance_check",
    "rate_standard_error",
    "ratio_standard_error",
    "simulate",
    "stability_verdict",
]

QUEUE_NAMES = ("p", "q1", "q2", "q1r", "q2r")

# per-slot uniform layout (columns of the pre-drawn block)
#  0 arrival Qp      1 arrival Q1      2 arrival Q2
#  3 tx rank draw    4 decode rank     5 primary channel
#  6 s1 decodes p    7 s2 decodes p    8 s1 accepts     9 s2 accepts
# 10 s1 queue pick  11 s2 queue pick  12 s1 RA gate    13 s2 RA gate
# 14 s1 tx channel  15 s2 tx channel
_COLS = 16

# counter layout
_C_ARR_P, _C_ARR_1, _C_ARR_2, _C_ARR_1R, _C_ARR_2R = 0, 1, 2, 3, 4
_C_DEP_P, _C_DEP_P_DIRECT, _C_DEP_1, _C_DEP_2, _C_DEP_1R, _C_DEP_2R = 5, 6, 7, 8, 9, 10
_C_BUSY_P = 11
_N_COUNTERS = 12


class Verdict(enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True, slots=True)
class QueueStats:
    arrivals: int
    departures: int
    final_len: int
    mean_len: float
    drift: float


@dataclass(eq=False)
class SimStats:
    """Empirical outcome of one run; rates are per slot unless noted."""

    slots: int
    seed: int
    queues: dict[str, QueueStats]
    empirical_mu_p: float
    empirical_relay_arrivals: tuple[float, float]
    busy_slots_p: int
    direct_successes: int
    verdict: Verdict
    drift_threshold: float
    len_threshold: float
    batch_counts: np.ndarray
    batch_slots: np.ndarray
    lengths: dict[str, np.ndarray] | None = None
    trace: list[dict] | None = field(default=None, repr=False)


def _attempt(q_own, q_rel, dummy_own, dummy_rel, p_own,
             u_choice, u_chan, s_own, s_rel):
    """One user's transmission try; dummies fill an empty queue but their
    delivery never counts. Returns (transmitted, used_own, success, real)."""
    own_avail = q_own > 0 or dummy_own
    rel_avail = q_rel > 0 or dummy_rel
    if own_avail and rel_avail:
        use_own = u_choice < p_own
    elif own_avail:
        use_own = True
    elif rel_avail:
        use_own = False
    else:
        return False, False, False, False
    if use_own:
        success = u_chan < s_own
        real = success and q_own > 0
    else:
        success = u_chan < s_rel
        real = success and q_rel > 0
    return True, use_own, success, real


def _run_slots(u, state, pf, fi, counters, sums, t0, half, lens, trace, trace_n):
    """Advance the system over one block of slots (kernel; numba-friendly).

    state: int64[5] queue lengths. pf: float64[22] =
    (lambda_p, lambda_1, lambda_2, p_succ_primary, pp1, pp2, eps, rho, p1, p2,
    f1, f2, a1, a2, s11, s12, s21, s22, r11, r12, r21, r22). fi: int64[6] =
    (random_access, dummy_q1, dummy_q2, dummy_q1r, dummy_q2r, record).
    sums: float64[15] = per-queue second-half sum(y), sum(tau*y), full sum(y).
    """
    lam_p, lam_1, lam_2 = pf[0], pf[1], pf[2]
    p_succ, pp1, pp2 = pf[3], pf[4], pf[5]
    eps, rho, p1, p2, f1, f2, a1, a2 = pf[6], pf[7], pf[8], pf[9], pf[10], pf[11], pf[12], pf[13]
    s11, s12, s21, s22 = pf[14], pf[15], pf[16], pf[17]
    r11, r12, r21, r22 = pf[18], pf[19], pf[20], pf[21]
    ra = fi[0] == 1
    dq1 = fi[1] == 1
    dq2 = fi[2] == 1
    dq1r = fi[3] == 1
    dq2r = fi[4] == 1
    record = fi[5] == 1

    qp, q1, q2, q1r, q2r = state[0], state[1], state[2], state[3], state[4]
    n = u.shape[0]
    for i in range(n):
        t = t0 + i
        sums[10] += qp
        sums[11] += q1
        sums[12] += q2
        sums[13] += q1r
        sums[14] += q2r
        if t >= half:
            tau = float(t - half)
            sums[0] += qp
            sums[1] += q1
            sums[2] += q2
            sums[3] += q1r
            sums[4] += q2r
            sums[5] += tau * qp
            sums[6] += tau * q1
            sums[7] += tau * q2
            sums[8] += tau * q1r
            sums[9] += tau * q2r
        if record:
            lens[0, t] = qp
            lens[1, t] = q1
            lens[2, t] = q2
            lens[3, t] = q1r
            lens[4, t] = q2r
        tracing = t < trace_n
        if tracing:
            trace[t, 0] = 1 if qp > 0 else 0
            trace[t, 1] = 1 if u[i, 3] < eps else 2
            trace[t, 2] = 1 if u[i, 4] < rho else 2
            trace[t, 3] = 0
            trace[t, 4] = 0
            trace[t, 5] = -1
            trace[t, 6] = 0
            trace[t, 7] = 0

        if qp > 0:
            counters[_C_BUSY_P] += 1
            if u[i, 5] < p_succ:
                qp -= 1
                counters[_C_DEP_P] += 1
                counters[_C_DEP_P_DIRECT] += 1
                if tracing:
                    trace[t, 5] = 1
                    trace[t, 6] = 1
            else:
                s1_decodes = u[i, 6] < pp1 and u[i, 8] < f1
                s2_decodes = u[i, 7] < pp2 and u[i, 9] < f2
                accepted = 0
                if u[i, 4] < rho:
                    if s1_decodes:
                        accepted = 1
                    elif s2_decodes:
                        accepted = 2
                else:
                    if s2_decodes:
                        accepted = 2
                    elif s1_decodes:
                        accepted = 1
                if accepted == 1:
                    q1r += 1
                    qp -= 1
                    counters[_C_ARR_1R] += 1
                    counters[_C_DEP_P] += 1
                elif accepted == 2:
                    q2r += 1
                    qp -= 1
                    counters[_C_ARR_2R] += 1
                    counters[_C_DEP_P] += 1
                if tracing:
                    trace[t, 5] = 0
                    trace[t, 6] = accepted + 1 if accepted > 0 else 0
        else:
            if ra:
                has1 = (q1 > 0 or dq1) or (q1r > 0 or dq1r)
                has2 = (q2 > 0 or dq2) or (q2r > 0 or dq2r)
                tx1 = has1 and u[i, 12] < a1
                tx2 = has2 and u[i, 13] < a2
                if tx1 and tx2:
                    if tracing:
                        trace[t, 3] = 3
                        trace[t, 5] = 0
                elif tx1:
                    did, own, succ, real = _attempt(
                        q1, q1r, dq1, dq1r, p1, u[i, 10], u[i, 14], s11, r11)
                    if real:
                        if own:
                            q1 -= 1
                            counters[_C_DEP_1] += 1
                        else:
                            q1r -= 1
                            counters[_C_DEP_1R] += 1
                    if tracing:
                        trace[t, 3] = 1
                        trace[t, 4] = 1 if own else 2
                        trace[t, 5] = 1 if succ else 0
                        trace[t, 7] = 0 if real or not succ else 1
                elif tx2:
                    did, own, succ, real = _attempt(
                        q2, q2r, dq2, dq2r, p2, u[i, 11], u[i, 15], s12, r12)
                    if real:
                        if own:
                            q2 -= 1
                            counters[_C_DEP_2] += 1
                        else:
                            q2r -= 1
                            counters[_C_DEP_2R] += 1
                    if tracing:
                        trace[t, 3] = 2
                        trace[t, 4] = 1 if own else 2
                        trace[t, 5] = 1 if succ else 0
                        trace[t, 7] = 0 if real or not succ else 1
            else:
                s1_first = u[i, 3] < eps
                if s1_first:
                    did, own, succ, real = _attempt(
                        q1, q1r, dq1, dq1r, p1, u[i, 10], u[i, 14], s11, r11)
                    if did:
                        if real:
                            if own:
                                q1 -= 1
                                counters[_C_DEP_1] += 1
                            else:
                                q1r -= 1
                                counters[_C_DEP_1R] += 1
                        if tracing:
                            trace[t, 3] = 1
                            trace[t, 4] = 1 if own else 2
                            trace[t, 5] = 1 if succ else 0
                            trace[t, 7] = 0 if real or not succ else 1
                    else:
                        did, own, succ, real = _attempt(
                            q2, q2r, dq2, dq2r, p2, u[i, 11], u[i, 15], s22, r22)
                        if did:
                            if real:
                                if own:
                                    q2 -= 1
                                    counters[_C_DEP_2] += 1
                                else:
                                    q2r -= 1
                                    counters[_C_DEP_2R] += 1
                            if tracing:
                                trace[t, 3] = 2
                                trace[t, 4] = 1 if own else 2
                                trace[t, 5] = 1 if succ else 0
                                trace[t, 7] = 0 if real or not succ else 1
                else:
                    did, own, succ, real = _attempt(
                        q2, q2r, dq2, dq2r, p2, u[i, 11], u[i, 15], s12, r12)
                    if did:
                        if real:
                            if own:
                                q2 -= 1
                                counters[_C_DEP_2] += 1
                            else:
                                q2r -= 1
                                counters[_C_DEP_2R] += 1
                        if tracing:
                            trace[t, 3] = 2
                            trace[t, 4] = 1 if own else 2
                            trace[t, 5] = 1 if succ else 0
                            trace[t, 7] = 0 if real or not succ else 1
                    else:
                        did, own, succ, real = _attempt(
                            q1, q1r, dq1, dq1r, p1, u[i, 10], u[i, 14], s21, r21)
                        if did:
                            if real:
                                if own:
                                    q1 -= 1
                                    counters[_C_DEP_1] += 1
                                else:
                                    q1r -= 1
                                    counters[_C_DEP_1R] += 1
                            if tracing:
                                trace[t, 3] = 1
                                trace[t, 4] = 1 if own else 2
                                trace[t, 5] = 1 if succ else 0
                                trace[t, 7] = 0 if real or not succ else 1

        # arrivals land at the end of the slot, served from the next one
        if u[i, 0] < lam_p:
            qp += 1
            counters[_C_ARR_P] += 1
        if u[i, 1] < lam_1:
            q1 += 1
            counters[_C_ARR_1] += 1
        if u[i, 2] < lam_2:
            q2 += 1
            counters[_C_ARR_2] += 1

    state[0], state[1], state[2], state[3], state[4] = qp, q1, q2, q1r, q2r


try:  # pragma: no cover - exercised whenever numba is installed
    from numba import njit

    _attempt = njit(cache=True)(_attempt)
    _run_slots = njit(cache=True)(_run_slots)
except ImportError:  # pragma: no cover
    pass


def _dummy_flags(variant: Scheme | None) -> tuple[int, int, int, int]:
    """(dummy Q1, Q2, Q1r, Q2r) injection flags for a decoupled variant."""
    if variant is None:
        return 0, 0, 0, 0
    if variant.outer:
        return (1, 0, 0, 0) if variant.dom == 1 else (0, 1, 0, 0)
    return (1, 0, 0, 1) if variant.dom == 1 else (0, 1, 1, 0)


def simulate(
    cfg: SystemConfig,
    pol: Policy,
    lambda_1: float,
    lambda_2: float,
    variant: Scheme | None = None,
    access: Access | None = None,
    slots: int = 100_000,
    seed: int = 0,
    *,
    record_lengths: bool = False,
    trace_slots: int = 0,
    n_batches: int = 50,
    drift_threshold: float = 1e-3,
    len_threshold: float = 5.0,
) -> SimStats:
    """Run the MAC protocol for ``slots`` slots; deterministic given ``seed``.

    ``variant`` selects a decoupled system (dummy packets keep the designated
    queues busy); ``None`` is the original coupled system. Noncooperative
    variants force both acceptance factors to zero. ``access`` may be omitted
    when a variant implies it.
    """
    if slots < 1:
        raise ValueError("slots must be >= 1")
    if variant is not None:
        if access is not None and access is not variant.access:
            raise ValueError(f"access {access} conflicts with variant {variant}")
        access = variant.access
        if variant.noncooperative:
            pol = pol.without_cooperation()
    elif access is None:
        access = Access.ORDERED

    table = cfg.link_table
    pf = np.array([
        cfg.lambda_p, lambda_1, lambda_2,
        cfg.p_succ_primary, cfg.p_succ_p_to_s1, cfg.p_succ_p_to_s2,
        pol.epsilon, pol.rho, pol.p1, pol.p2, pol.f1, pol.f2,
        pol.alpha1, pol.alpha2, *table,
    ], dtype=np.float64)
    d1, d2, d1r, d2r = _dummy_flags(variant)
    fi = np.array([
        1 if access is Access.RANDOM else 0,
        d1, d2, d1r, d2r,
        1 if record_lengths else 0,
    ], dtype=np.int64)

    state = np.zeros(5, dtype=np.int64)
    counters = np.zeros(_N_COUNTERS, dtype=np.int64)
    sums = np.zeros(15, dtype=np.float64)
    lens = np.zeros((5, slots if record_lengths else 0), dtype=np.int64)
    trace_n = min(trace_slots, slots)
    trace = np.zeros((trace_n, 8), dtype=np.int64)

    n_batches = max(1, min(n_batches, slots))
    base, extra = divmod(slots, n_batches)
    batch_sizes = [base + (1 if b < extra else 0) for b in range(n_batches)]
    batch_counts = np.zeros((n_batches, _N_COUNTERS), dtype=np.int64)

    rng = np.random.default_rng(seed)
    half = slots // 2
    t0 = 0
    for b, size in enumerate(batch_sizes):
        if size == 0:
            continue
        u = rng.random((size, _COLS))
        before = counters.copy()
        _run_slots(u, state, pf, fi, counters, sums, t0, half, lens, trace, trace_n)
        batch_counts[b] = counters - before
        t0 += size

    queues = {}
    arr_idx = (_C_ARR_P, _C_ARR_1, _C_ARR_2, _C_ARR_1R, _C_ARR_2R)
    dep_idx = (_C_DEP_P, _C_DEP_1, _C_DEP_2, _C_DEP_1R, _C_DEP_2R)
    n2 = slots - half
    if n2 >= 2:
        sx = n2 * (n2 - 1) / 2.0
        sxx = (n2 - 1) * n2 * (2 * n2 - 1) / 6.0
        denom = sxx - sx * sx / n2
    else:
        denom = 0.0
    for k, name in enumerate(QUEUE_NAMES):
        drift = 0.0
        if denom > 0.0:
            drift = (sums[5 + k] - sx * sums[k] / n2) / denom
        queues[name] = QueueStats(
            arrivals=int(counters[arr_idx[k]]),
            departures=int(counters[dep_idx[k]]),
            final_len=int(state[k]),
            mean_len=float(sums[10 + k] / slots),
            drift=float(drift),
        )

    busy = int(counters[_C_BUSY_P])
    stats = SimStats(
        slots=slots,
        seed=seed,
        queues=queues,
        empirical_mu_p=float(counters[_C_DEP_P] / busy) if busy else 0.0,
        empirical_relay_arrivals=(
            float(counters[_C_ARR_1R] / slots), float(counters[_C_ARR_2R] / slots)),
        busy_slots_p=busy,
        direct_successes=int(counters[_C_DEP_P_DIRECT]),
        verdict=Verdict.INCONCLUSIVE,
        drift_threshold=drift_threshold,
        len_threshold=len_threshold,
        batch_counts=batch_counts,
        batch_slots=np.array(batch_sizes, dtype=np.int64),
        lengths={name: lens[k].copy() for k, name in enumerate(QUEUE_NAMES)}
        if record_lengths else None,
        trace=_decode_trace(trace) if trace_n else None,
    )
    stats.verdict = stability_verdict(stats, drift_threshold, len_threshold)
    return stats


_ACKS = (None, "primary_rx", "s1", "s2")


def _decode_trace(trace: np.ndarray) -> list[dict]:
    records = []
    for t in range(trace.shape[0]):
        row = trace[t]
        tx = int(row[3])
        records.append({
            "slot": t,
            "primary_active": bool(row[0]),
            "tx_rank_first": int(row[1]),
            "decode_rank_first": int(row[2]),
            "transmitter": "collision" if tx == 3 else (tx if tx else None),
            "source_queue": (None, "own", "relay")[int(row[4])],
            "success": None if row[5] < 0 else bool(row[5]),
            "ack": _ACKS[int(row[6])],
            "dummy": bool(row[7]),
        })
    return records


def stability_verdict(
    stats: SimStats,
    drift_threshold: float | None = None,
    len_threshold: float | None = None,
) -> Verdict:
    """Classify a run: growing queues are unstable, flat short ones stable.

    A queue is clearly stable when its second-half drift stays below the
    threshold and the final backlog is within ``len_threshold * sqrt(slots)``
    of diffusion scale; clearly unstable when the drift is twice the
    threshold with a matching backlog. Mixed evidence is inconclusive.
    """
    drift_threshold = stats.drift_threshold if drift_threshold is None else drift_threshold
    len_threshold = stats.len_threshold if len_threshold is None else len_threshold
    limit = len_threshold * math.sqrt(stats.slots)
    stable_all = True
    for q in stats.queues.values():
        if q.drift > 2 * drift_threshold and q.final_len >= limit:
            return Verdict.UNSTABLE
        if not (q.drift < drift_threshold and q.final_len < limit):
            stable_all = False
    return Verdict.STABLE if stable_all else Verdict.INCONCLUSIVE


def rate_standard_error(batch_counts: np.ndarray, batch_slots: np.ndarray) -> float:
    """Batch-means standard error of a per-slot rate (autocorrelation-robust)."""
    rates = batch_counts / batch_slots
    if rates.size < 2:
        return math.inf
    return float(np.std(rates, ddof=1) / math.sqrt(rates.size))


def ratio_standard_error(batch_num: np.ndarray, batch_den: np.ndarray) -> float:
    """Batch-means standard error of a conditional rate (num/den per batch)."""
    mask = batch_den > 0
    if mask.sum() < 2:
        return math.inf
    rates = batch_num[mask] / batch_den[mask]
    return float(np.std(rates, ddof=1) / math.sqrt(rates.size))


def dominance_check(
    cfg: SystemConfig,
    pol: Policy,
    lambdas: tuple[float, float],
    scheme: Scheme,
    slots: int = 100_000,
    seed: int = 0,
) -> bool:
    """Pathwise comparison on shared randomness: True when every real-packet
    queue in the decoupled run is at least as long as in the original run at
    every single slot."""
    lambda_1, lambda_2 = lambdas
    if scheme.noncooperative:
        pol = pol.without_cooperation()
    original = simulate(cfg, pol, lambda_1, lambda_2, variant=None,
                        access=scheme.access, slots=slots, seed=seed,
                        record_lengths=True)
    dominant = simulate(cfg, pol, lambda_1, lambda_2, variant=scheme,
                        slots=slots, seed=seed, record_lengths=True)
    return all(
        bool(np.all(dominant.lengths[name] >= original.lengths[name]))
        for name in QUEUE_NAMES
    )
