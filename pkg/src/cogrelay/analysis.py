"""Feasibility analysis of arrival-rate pairs under every decoupled variant.

Each scheme freezes the queue interaction of the coupled system in a
different way (dummy-packet injection for inner bounds, occupancy
upper-bounds for outer bounds). The resulting rate expressions are
triangular: decoupled queues first, then the queues whose emptiness they
determine. A point is feasible when every queue satisfies the strict
arrival < service criterion, with a small numerical slack.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    Access,
    InfeasiblePrimaryError,
    Policy,
    RatePoint,
    Scheme,
    SystemConfig,
    _check_prob,
    _service_rates,
    occupancy_ratio,
)

__all__ = [
    "CONSTRAINT_TAGS",
    "STABILITY_SLACK",
    "FeasibilityReport",
    "evaluate_scheme",
    "point_evaluator",
]

# Strict stability is required; points grazing the boundary closer than this
# are reported infeasible, which keeps sweeps conservative and reproducible.
STABILITY_SLACK = 1e-9

CONSTRAINT_TAGS = ("PrimaryStability", "Q1", "Q2", "Q1r", "Q2r")


@dataclass(frozen=True, slots=True)
class FeasibilityReport:
    """Rates and per-queue stability verdicts for one (scheme, point) query."""

    rates: RatePoint
    feasible: bool
    violated: tuple[str, ...]


def _gap(arrival: float, service: float) -> float:
    """How far a queue is from satisfying arrival <= service - slack; 0 if stable."""
    if arrival == 0.0:
        return 0.0
    return max(0.0, arrival - (service - STABILITY_SLACK))


def _eval_dom1(
    lp: float, p_succ: float, pp1: float, pp2: float, table: tuple,
    eps: float, rho: float, p1: float, p2: float, f1: float, f2: float,
    a1: float, a2: float, l1: float, l2: float,
    random_access: bool, outer: bool,
) -> tuple:
    """First decoupled variant: user 1's own queue is kept saturated.

    Inner form additionally saturates user 2's relaying queue; outer form
    upper-bounds the rates of the remaining interacting pair (Q1, Q2).
    Returns (mu_p, pi_pe, l1r, l2r, mu_1, mu_2, mu_1r, mu_2r, g_p, g1, g2,
    g1r, g2r) where the g's are stability gaps per CONSTRAINT_TAGS.
    """
    admit1 = pp1 * f1
    admit2 = pp2 * f2
    mu_p = p_succ + (1.0 - p_succ) * (admit1 + admit2 - admit1 * admit2)
    pi_pe = 1.0 - occupancy_ratio(lp, mu_p)
    busy = (1.0 - pi_pe) * (1.0 - p_succ)
    l1r = busy * admit1 * (rho + (1.0 - rho) * (1.0 - admit2))
    l2r = busy * admit2 * ((1.0 - rho) + rho * (1.0 - admit1))
    if outer:
        # P{Q1 empty} pinned to 0 by dummies; selection brackets dropped (:=1)
        _, mu_2, _, _ = _service_rates(
            pi_pe, *table, eps, p1, p2, a1, a2,
            0.0, 0.0, 1.0, 1.0, 0.0, 0.0, random_access)
        q2e = 1.0 - occupancy_ratio(l2, mu_2)
        mu_1, _, mu_1r, mu_2r = _service_rates(
            pi_pe, *table, eps, p1, p2, a1, a2,
            0.0, q2e, 1.0, 1.0, 0.0, q2e, random_access)
    else:
        # dummies in Q1 and Q2r decouple mu_1r and mu_2
        _, mu_2, mu_1r, _ = _service_rates(
            pi_pe, *table, eps, p1, p2, a1, a2,
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, random_access)
        q1re = 1.0 - occupancy_ratio(l1r, mu_1r)
        q2e = 1.0 - occupancy_ratio(l2, mu_2)
        mu_1, _, _, mu_2r = _service_rates(
            pi_pe, *table, eps, p1, p2, a1, a2,
            0.0, q2e, q1re, 0.0, 0.0, 0.0, random_access)
    return (
        mu_p, pi_pe, l1r, l2r, mu_1, mu_2, mu_1r, mu_2r,
        _gap(lp, mu_p), _gap(l1, mu_1), _gap(l2, mu_2),
        _gap(l1r, mu_1r), _gap(l2r, mu_2r),
    )


def _eval_ordered_inner_dom2(
    lp: float, p_succ: float, pp1: float, pp2: float, table: tuple,
    eps: float, rho: float, p1: float, p2: float, f1: float, f2: float,
    l1: float, l2: float,
) -> tuple:
    """Second ordered inner variant: dummies in Q2 and Q1r (written out
    explicitly rather than by user relabelling so the symmetry between the
    two variants is a testable property, not a construction)."""
    admit1 = pp1 * f1
    admit2 = pp2 * f2
    mu_p = p_succ + (1.0 - p_succ) * (admit1 + admit2 - admit1 * admit2)
    pi_pe = 1.0 - occupancy_ratio(lp, mu_p)
    busy = (1.0 - pi_pe) * (1.0 - p_succ)
    l1r = busy * admit1 * (rho + (1.0 - rho) * (1.0 - admit2))
    l2r = busy * admit2 * ((1.0 - rho) + rho * (1.0 - admit1))
    mu_1, _, _, mu_2r = _service_rates(
        pi_pe, *table, eps, p1, p2, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, False)
    q1e = 1.0 - occupancy_ratio(l1, mu_1)
    q2re = 1.0 - occupancy_ratio(l2r, mu_2r)
    _, mu_2, mu_1r, _ = _service_rates(
        pi_pe, *table, eps, p1, p2, 0.0, 0.0,
        q1e, 0.0, 0.0, q2re, 0.0, 0.0, False)
    return (
        mu_p, pi_pe, l1r, l2r, mu_1, mu_2, mu_1r, mu_2r,
        _gap(lp, mu_p), _gap(l1, mu_1), _gap(l2, mu_2),
        _gap(l1r, mu_1r), _gap(l2r, mu_2r),
    )


def point_evaluator(scheme: Scheme, cfg: SystemConfig):
    """Bind a scheme and environment into a fast point evaluation closure.

    The closure maps (eps, rho, p1, p2, f1, f2, alpha1, alpha2, lambda_1,
    lambda_2) to the 13-tuple documented on ``_eval_dom1``; policy searches
    call it hundreds of thousands of times, so it works on plain floats.
    """
    random_access = scheme.access is Access.RANDOM
    outer = scheme.outer
    noncoop = scheme.noncooperative
    lp = cfg.lambda_p
    p_succ = cfg.p_succ_primary
    pp1 = cfg.p_succ_p_to_s1
    pp2 = cfg.p_succ_p_to_s2
    table = cfg.link_table

    if scheme.dom == 1:
        def evaluate(eps, rho, p1, p2, f1, f2, a1, a2, l1, l2):
            if noncoop:
                f1 = f2 = 0.0
            return _eval_dom1(lp, p_succ, pp1, pp2, table,
                              eps, rho, p1, p2, f1, f2, a1, a2, l1, l2,
                              random_access, outer)
        return evaluate

    if scheme in (Scheme.ORDERED_INNER_DOM2, Scheme.ORDERED_NONCOOP_DOM2):
        def evaluate(eps, rho, p1, p2, f1, f2, a1, a2, l1, l2):
            if noncoop:
                f1 = f2 = 0.0
            return _eval_ordered_inner_dom2(lp, p_succ, pp1, pp2, table,
                                            eps, rho, p1, p2, f1, f2, l1, l2)
        return evaluate

    # remaining second variants are generated by relabelling the users and
    # evaluating the corresponding first variant
    s11, s12, s21, s22, r11, r12, r21, r22 = table
    swapped_table = (s12, s11, s22, s21, r12, r11, r22, r21)

    def evaluate(eps, rho, p1, p2, f1, f2, a1, a2, l1, l2):
        if noncoop:
            f1 = f2 = 0.0
        (mu_p, pi_pe, l2r, l1r, mu_2, mu_1, mu_2r, mu_1r,
         g_p, g2, g1, g2r, g1r) = _eval_dom1(
            lp, p_succ, pp2, pp1, swapped_table,
            1.0 - eps, 1.0 - rho, p2, p1, f2, f1, a2, a1, l2, l1,
            random_access, outer)
        return (mu_p, pi_pe, l1r, l2r, mu_1, mu_2, mu_1r, mu_2r,
                g_p, g1, g2, g1r, g2r)

    return evaluate


def evaluate_scheme(
    scheme: Scheme,
    cfg: SystemConfig,
    pol: Policy,
    lambda_1: float,
    lambda_2: float,
) -> FeasibilityReport:
    """Evaluate one arrival-rate pair under a scheme and check stability.

    Raises ``InfeasiblePrimaryError`` when the primary queue itself cannot be
    stabilised under the given acceptance factors; every secondary
    infeasibility is reported through the ``violated`` tags instead.
    """
    _check_prob("lambda_1", lambda_1)
    _check_prob("lambda_2", lambda_2)
    evaluate = point_evaluator(scheme, cfg)
    res = evaluate(pol.epsilon, pol.rho, pol.p1, pol.p2,
                   pol.f1, pol.f2, pol.alpha1, pol.alpha2,
                   lambda_1, lambda_2)
    mu_p = res[0]
    if cfg.lambda_p > mu_p:
        raise InfeasiblePrimaryError(
            f"primary queue unstable: lambda_p={cfg.lambda_p!r} > mu_p={mu_p!r}"
        )
    rates = RatePoint(
        mu_p=mu_p, pi_pe=res[1], lambda_1r=res[2], lambda_2r=res[3],
        mu_1=res[4], mu_2=res[5], mu_1r=res[6], mu_2r=res[7],
        scheme=scheme,
    )
    violated = tuple(tag for tag, gap in zip(CONSTRAINT_TAGS, res[8:]) if gap > 0.0)
    return FeasibilityReport(rates=rates, feasible=not violated, violated=violated)
