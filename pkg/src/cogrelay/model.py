"""Closed-form rate model of a slotted cognitive relaying network.

One primary transmitter shares the channel with two cognitive users. Each
cognitive user keeps an own-traffic queue and a relaying queue that buffers
primary packets it agreed to forward. All quantities here are per-slot
probabilities; channel qualities are stored as SUCCESS probabilities
(complements of outage) throughout, which keeps the algebra free of
double negations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from functools import cached_property

__all__ = [
    "Access",
    "ConfigError",
    "DerivedLink",
    "DirectLink",
    "InfeasiblePrimaryError",
    "Policy",
    "QueueOccupancy",
    "RatePoint",
    "Scheme",
    "SecondaryLink",
    "SystemConfig",
    "conditional_service_rates",
    "link_success",
    "occupancy_ratio",
    "primary_empty_prob",
    "primary_service_rate",
    "relay_arrival_rates",
]

PROB_TOL = 1e-12


class ConfigError(ValueError):
    """A configuration value violates its domain or an internal consistency rule."""


class InfeasiblePrimaryError(ValueError):
    """The primary arrival rate exceeds the primary service rate.

    Every secondary quantity is conditioned on the primary queue reaching a
    stationary regime, so nothing downstream is meaningful in this case.
    """


def _check_prob(name: str, value: float) -> None:
    if not (-PROB_TOL <= value <= 1.0 + PROB_TOL):
        raise ConfigError(f"{name}: probability {value!r} outside [0, 1]")


class Access(enum.Enum):
    """How the two cognitive users share a primary-idle slot."""

    ORDERED = "ordered"
    RANDOM = "random_access"


class Scheme(enum.Enum):
    """Decoupled (dominant-system) variants used for region bounds.

    ``inner`` variants inject dummy packets into one own-queue and the other
    user's relaying queue; ``outer`` variants additionally replace joint
    occupancy terms by marginals and drop own/relay selection brackets, so
    they over-estimate service. ``noncoop`` variants are the inner systems
    with both acceptance factors forced to zero.
    """

    ORDERED_INNER_DOM1 = "ordered_inner_dom1"
    ORDERED_INNER_DOM2 = "ordered_inner_dom2"
    ORDERED_NONCOOP_DOM1 = "ordered_noncoop_dom1"
    ORDERED_NONCOOP_DOM2 = "ordered_noncoop_dom2"
    ORDERED_OUTER_DOM1 = "ordered_outer_dom1"
    ORDERED_OUTER_DOM2 = "ordered_outer_dom2"
    RA_INNER_DOM1 = "ra_inner_dom1"
    RA_INNER_DOM2 = "ra_inner_dom2"
    RA_NONCOOP_DOM1 = "ra_noncoop_dom1"
    RA_NONCOOP_DOM2 = "ra_noncoop_dom2"
    RA_OUTER_DOM1 = "ra_outer_dom1"
    RA_OUTER_DOM2 = "ra_outer_dom2"

    @property
    def access(self) -> Access:
        return Access.RANDOM if self.value.startswith("ra_") else Access.ORDERED

    @property
    def outer(self) -> bool:
        return "_outer_" in self.value

    @property
    def noncooperative(self) -> bool:
        return "_noncoop_" in self.value

    @property
    def dom(self) -> int:
        return int(self.value[-1])

    @property
    def mirrored(self) -> "Scheme":
        """Same family with the two users' roles exchanged."""
        other = self.value[:-1] + ("2" if self.dom == 1 else "1")
        return Scheme(other)


@dataclass(frozen=True, slots=True)
class DirectLink:
    """Channel success probability pinned for one (rank, user) slot position."""

    success: float

    def __post_init__(self) -> None:
        _check_prob("success", self.success)


@dataclass(frozen=True, slots=True)
class DerivedLink:
    """Rate-adaptive link whose success decays with delayed channel access.

    A user that starts transmitting ``i`` sensing windows into the slot still
    delivers one packet by raising its rate over the shrunken window
    ``1 - i*tau_over_T``, paying ``a * exp(-b * 2**(c / (1 - i*tau_over_T)))``
    success probability. ``a``, ``b``, ``c`` bundle bandwidth, packet size and
    power; they are opaque inputs here.
    """

    a: float
    b: float
    c: float
    tau_over_T: float

    def __post_init__(self) -> None:
        _check_prob("a", self.a)
        if self.b <= 0.0:
            raise ConfigError(f"b: expected > 0, got {self.b!r}")
        if self.c <= 0.0:
            raise ConfigError(f"c: expected > 0, got {self.c!r}")
        if not (0.0 <= self.tau_over_T < 0.5):
            raise ConfigError(f"tau_over_T: expected in [0, 0.5), got {self.tau_over_T!r}")


SecondaryLink = DirectLink | DerivedLink


def link_success(link: SecondaryLink, rank_index: int) -> float:
    """Success probability of a transmission starting at rank position ``rank_index``.

    Direct links are already stored per slot position, so the rank only
    matters for the derived form. Raises ``ValueError`` when the transmission
    window ``1 - rank_index*tau_over_T`` has vanished.
    """
    if isinstance(link, DirectLink):
        return link.success
    window = 1.0 - rank_index * link.tau_over_T
    if window <= 0.0:
        raise ValueError(
            f"transmission window vanished: 1 - {rank_index}*{link.tau_over_T} <= 0"
        )
    return link.a * math.exp(-link.b * 2.0 ** (link.c / window))


LinkMatrix = tuple[tuple[SecondaryLink, SecondaryLink], tuple[SecondaryLink, SecondaryLink]]


@dataclass(frozen=True)
class SystemConfig:
    """Exogenous environment: arrival rates and channel success probabilities.

    ``secondary_links`` and ``relay_links`` are 2x2 matrices indexed by
    (rank position, user): row 1 holds the links used when the user accesses
    the channel first, row 2 when it defers one sensing window. Secondary
    links point at the user's own receiver, relay links at the primary
    receiver.
    """

    lambda_p: float
    lambda_1: float
    lambda_2: float
    p_succ_primary: float
    p_succ_p_to_s1: float
    p_succ_p_to_s2: float
    secondary_links: LinkMatrix
    relay_links: LinkMatrix

    def __post_init__(self) -> None:
        for name in ("lambda_p", "lambda_1", "lambda_2", "p_succ_primary",
                     "p_succ_p_to_s1", "p_succ_p_to_s2"):
            _check_prob(name, getattr(self, name))
        for label, matrix in (("secondary_links", self.secondary_links),
                              ("relay_links", self.relay_links)):
            for user in (1, 2):
                first = link_success(matrix[0][user - 1], 1)
                second = link_success(matrix[1][user - 1], 2)
                _check_prob(f"{label}[1][{user}]", first)
                _check_prob(f"{label}[2][{user}]", second)
                if second > first + PROB_TOL:
                    raise ConfigError(
                        f"{label} user {user}: delayed access must not improve "
                        f"success ({second!r} > {first!r})"
                    )

    def secondary_success(self, rank: int, user: int) -> float:
        return link_success(self.secondary_links[rank - 1][user - 1], rank)

    def relay_success(self, rank: int, user: int) -> float:
        return link_success(self.relay_links[rank - 1][user - 1], rank)

    def delta_secondary(self, user: int) -> float:
        """Rank-2 over rank-1 success ratio of the user's own-traffic link."""
        return self.secondary_success(2, user) / self.secondary_success(1, user)

    def delta_relay(self, user: int) -> float:
        """Rank-2 over rank-1 success ratio of the user's relaying link."""
        return self.relay_success(2, user) / self.relay_success(1, user)

    @cached_property
    def link_table(self) -> tuple[float, float, float, float, float, float, float, float]:
        """(s11, s12, s21, s22, r11, r12, r21, r22) evaluated successes."""
        return (
            self.secondary_success(1, 1), self.secondary_success(1, 2),
            self.secondary_success(2, 1), self.secondary_success(2, 2),
            self.relay_success(1, 1), self.relay_success(1, 2),
            self.relay_success(2, 1), self.relay_success(2, 2),
        )

    def swapped(self) -> "SystemConfig":
        """The same environment with the two cognitive users relabelled."""
        def swap(matrix: LinkMatrix) -> LinkMatrix:
            return ((matrix[0][1], matrix[0][0]), (matrix[1][1], matrix[1][0]))

        return replace(
            self,
            lambda_1=self.lambda_2,
            lambda_2=self.lambda_1,
            p_succ_p_to_s1=self.p_succ_p_to_s2,
            p_succ_p_to_s2=self.p_succ_p_to_s1,
            secondary_links=swap(self.secondary_links),
            relay_links=swap(self.relay_links),
        )


@dataclass(frozen=True, slots=True)
class Policy:
    """Controllable parameters of the two cognitive users.

    epsilon  probability that user 1 is ranked first for sensing/transmission
    rho      probability that user 1 is ranked first for decoding the
             primary packet at the end of a busy slot
    p1, p2   probability of picking the own queue when both queues hold packets
    f1, f2   probability of admitting a correctly decoded primary packet
    alpha1,  per-slot transmit probabilities under random access (ignored by
    alpha2   the ordered protocol)

    With ``tie_rho_to_epsilon`` set, ``rho`` is forced equal to ``epsilon``
    and drops out of policy searches.
    """

    epsilon: float = 0.5
    rho: float = 0.5
    p1: float = 0.5
    p2: float = 0.5
    f1: float = 0.0
    f2: float = 0.0
    alpha1: float = 0.0
    alpha2: float = 0.0
    tie_rho_to_epsilon: bool = False

    def __post_init__(self) -> None:
        if self.tie_rho_to_epsilon:
            object.__setattr__(self, "rho", self.epsilon)
        for name in ("epsilon", "rho", "p1", "p2", "f1", "f2", "alpha1", "alpha2"):
            _check_prob(name, getattr(self, name))

    def without_cooperation(self) -> "Policy":
        return replace(self, f1=0.0, f2=0.0)

    def swapped(self) -> "Policy":
        """Policy as seen after relabelling the two users."""
        return replace(
            self,
            epsilon=1.0 - self.epsilon,
            rho=self.epsilon if self.tie_rho_to_epsilon else 1.0 - self.rho,
            p1=self.p2, p2=self.p1,
            f1=self.f2, f2=self.f1,
            alpha1=self.alpha2, alpha2=self.alpha1,
        )


@dataclass(frozen=True, slots=True)
class QueueOccupancy:
    """Stationary emptiness probabilities fed into the general rate forms.

    ``q1_and_q1r_empty`` is the probability that user 1 has nothing at all to
    send (both queues empty); likewise for user 2. Joints never exceed their
    marginals.
    """

    q1_empty: float
    q2_empty: float
    q1r_empty: float
    q2r_empty: float
    q1_and_q1r_empty: float
    q2_and_q2r_empty: float

    def validate(self) -> None:
        for name in ("q1_empty", "q2_empty", "q1r_empty", "q2r_empty",
                     "q1_and_q1r_empty", "q2_and_q2r_empty"):
            _check_prob(name, getattr(self, name))
        if self.q1_and_q1r_empty > min(self.q1_empty, self.q1r_empty) + PROB_TOL:
            raise ConfigError("q1_and_q1r_empty exceeds a marginal")
        if self.q2_and_q2r_empty > min(self.q2_empty, self.q2r_empty) + PROB_TOL:
            raise ConfigError("q2_and_q2r_empty exceeds a marginal")


@dataclass(frozen=True, slots=True)
class RatePoint:
    """All service and relay-arrival rates evaluated for one operating point."""

    mu_p: float
    pi_pe: float
    lambda_1r: float
    lambda_2r: float
    mu_1: float
    mu_2: float
    mu_1r: float
    mu_2r: float
    scheme: Scheme | None = None


def primary_service_rate(cfg: SystemConfig, pol: Policy) -> float:
    """Per-busy-slot departure probability of the primary queue.

    A packet leaves either by direct success or, after a primary outage, by
    being decoded and admitted at one of the cognitive users. The decoding
    order cancels out, so the result does not depend on ``rho``.
    """
    admit1 = cfg.p_succ_p_to_s1 * pol.f1
    admit2 = cfg.p_succ_p_to_s2 * pol.f2
    return cfg.p_succ_primary + (1.0 - cfg.p_succ_primary) * (
        admit1 + admit2 - admit1 * admit2
    )


def primary_empty_prob(lambda_p: float, mu_p: float) -> float:
    """Stationary probability that the primary queue is empty at a slot start."""
    if lambda_p == 0.0:
        return 1.0
    if lambda_p > mu_p:
        raise InfeasiblePrimaryError(
            f"primary queue unstable: lambda_p={lambda_p!r} > mu_p={mu_p!r}"
        )
    return 1.0 - lambda_p / mu_p


def relay_arrival_rates(cfg: SystemConfig, pol: Policy, pi_pe: float) -> tuple[float, float]:
    """Per-slot admission rates into the two relaying queues.

    User 1 captures a failed primary packet when it decodes and accepts it,
    and it is either first in the decoding order or the first-ranked user 2
    did not admit the packet itself; symmetrically for user 2.
    """
    busy = (1.0 - pi_pe) * (1.0 - cfg.p_succ_primary)
    admit1 = cfg.p_succ_p_to_s1 * pol.f1
    admit2 = cfg.p_succ_p_to_s2 * pol.f2
    lambda_1r = busy * admit1 * (pol.rho + (1.0 - pol.rho) * (1.0 - admit2))
    lambda_2r = busy * admit2 * ((1.0 - pol.rho) + pol.rho * (1.0 - admit1))
    return lambda_1r, lambda_2r


def occupancy_ratio(arrival: float, service: float) -> float:
    """Stationary busy probability ``arrival/service`` with guarded edges.

    A queue with no arrivals is empty no matter the service (0/0 -> 0); a
    positive arrival rate with zero service saturates, which is clamped to 1
    here so downstream rate expressions stay inside [0, 1]. Stability checks
    are made on the unclamped comparison, never on this value.
    """
    if arrival <= 0.0:
        return 0.0
    if service <= 0.0:
        return 1.0
    return min(arrival / service, 1.0)


def _service_rates(
    pi_pe: float,
    s11: float, s12: float, s21: float, s22: float,
    r11: float, r12: float, r21: float, r22: float,
    eps: float, p1: float, p2: float, a1: float, a2: float,
    q1e: float, q2e: float, q1re: float, q2re: float,
    j1e: float, j2e: float,
    random_access: bool,
) -> tuple[float, float, float, float]:
    """General-form service rates; single source of truth for every variant."""
    own1 = p1 * (1.0 - q1re) + q1re
    own2 = p2 * (1.0 - q2re) + q2re
    rel1 = (1.0 - p1) * (1.0 - q1e) + q1e
    rel2 = (1.0 - p2) * (1.0 - q2e) + q2e
    if random_access:
        # the other user stays silent when it has nothing or withholds
        quiet2 = (1.0 - j2e) * (1.0 - a2) + j2e
        quiet1 = (1.0 - j1e) * (1.0 - a1) + j1e
        mu_1 = pi_pe * s11 * a1 * quiet2 * own1
        mu_2 = pi_pe * s12 * a2 * quiet1 * own2
        mu_1r = pi_pe * r11 * a1 * quiet2 * rel1
        mu_2r = pi_pe * r12 * a2 * quiet1 * rel2
    else:
        # first-ranked access, or second-ranked when the other user is idle
        gate1 = eps * s11 + (1.0 - eps) * s21 * j2e
        gate2 = (1.0 - eps) * s12 + eps * s22 * j1e
        gate1r = eps * r11 + (1.0 - eps) * r21 * j2e
        gate2r = (1.0 - eps) * r12 + eps * r22 * j1e
        mu_1 = pi_pe * gate1 * own1
        mu_2 = pi_pe * gate2 * own2
        mu_1r = pi_pe * gate1r * rel1
        mu_2r = pi_pe * gate2r * rel2
    return mu_1, mu_2, mu_1r, mu_2r


def conditional_service_rates(
    cfg: SystemConfig,
    pol: Policy,
    pi_pe: float,
    occ: QueueOccupancy,
    access: Access,
) -> tuple[float, float, float, float]:
    """Service rates (mu_1, mu_2, mu_1r, mu_2r) under the given occupancies.

    Evaluates the four general-form expressions exactly as written; dominant
    and bounding variants call this with degenerate occupancy values.
    """
    occ.validate()
    _check_prob("pi_pe", pi_pe)
    return _service_rates(
        pi_pe, *cfg.link_table,
        pol.epsilon, pol.p1, pol.p2, pol.alpha1, pol.alpha2,
        occ.q1_empty, occ.q2_empty, occ.q1r_empty, occ.q2r_empty,
        occ.q1_and_q1r_empty, occ.q2_and_q2r_empty,
        access is Access.RANDOM,
    )
