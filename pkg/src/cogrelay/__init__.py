"""Stable-throughput analysis and simulation of cooperative cognitive relaying."""

__version__ = "0.1.0"

from .analysis import FeasibilityReport, evaluate_scheme
from .configs import load_config, parse_config
from .model import (
    Access,
    ConfigError,
    DerivedLink,
    DirectLink,
    InfeasiblePrimaryError,
    Policy,
    QueueOccupancy,
    RatePoint,
    Scheme,
    SystemConfig,
    conditional_service_rates,
    link_success,
    primary_empty_prob,
    primary_service_rate,
    relay_arrival_rates,
)
from .optimize import (
    Region,
    RegionSample,
    SearchSettings,
    boundary_sweep,
    max_lambda1_given_lambda2,
    max_lambda2_given_lambda1,
    multistart_maximize,
    region_union,
)
from .simulate import (
    SimStats,
    Verdict,
    dominance_check,
    simulate,
    stability_verdict,
)

__all__ = [
    "Access",
    "ConfigError",
    "DerivedLink",
    "DirectLink",
    "FeasibilityReport",
    "InfeasiblePrimaryError",
    "Policy",
    "QueueOccupancy",
    "RatePoint",
    "Region",
    "RegionSample",
    "Scheme",
    "SearchSettings",
    "SimStats",
    "SystemConfig",
    "Verdict",
    "boundary_sweep",
    "conditional_service_rates",
    "dominance_check",
    "evaluate_scheme",
    "link_success",
    "load_config",
    "max_lambda1_given_lambda2",
    "max_lambda2_given_lambda1",
    "multistart_maximize",
    "parse_config",
    "primary_empty_prob",
    "primary_service_rate",
    "region_union",
    "relay_arrival_rates",
    "simulate",
    "stability_verdict",
]
