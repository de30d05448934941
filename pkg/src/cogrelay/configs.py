"""Scenario files: nested key-value (YAML) descriptions of the environment.

Three scenarios ship with the package (``fig2``, ``fig3``, ``fig4``); they
pin the channel sets used by the bundled region sweeps and the acceptance
suite. Every probability is validated on load with the offending field named
in the error.
"""

from __future__ import annotations

import hashlib
from importlib import resources
from pathlib import Path

import yaml

from .model import ConfigError, DerivedLink, DirectLink, SecondaryLink, SystemConfig

__all__ = ["BUNDLED", "config_digest", "load_config", "parse_config"]

BUNDLED = ("fig2", "fig3", "fig4")


def _bundled_text(name: str) -> str:
    return resources.files("cogrelay.data").joinpath(f"{name}.yaml").read_text()


def load_config(source: str | Path) -> SystemConfig:
    """Load a scenario by bundled name or filesystem path."""
    name = str(source)
    if name in BUNDLED:
        return parse_config(_bundled_text(name), origin=name)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {name}: {exc}") from exc
    return parse_config(text, origin=name)


def config_text(source: str | Path) -> str:
    """Raw text of a scenario (used for content hashing)."""
    name = str(source)
    if name in BUNDLED:
        return _bundled_text(name)
    return Path(source).read_text()


def config_digest(source: str | Path) -> str:
    """Content hash of the scenario text."""
    return hashlib.sha256(config_text(source).encode()).hexdigest()


def _require(mapping, key, path):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"{path}: missing required field '{key}'")
    return mapping[key]


def _number(mapping, key, path):
    value = _require(mapping, key, path)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {value!r}")
    return float(value)


def _probability(mapping, key, path):
    value = _number(mapping, key, path)
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{path}.{key}: probability {value!r} outside [0, 1]")
    return value


def _parse_link_pair(entry, path) -> tuple[SecondaryLink, SecondaryLink]:
    """One user's (rank-1, rank-2) links from any of the accepted forms."""
    if not isinstance(entry, dict):
        raise ConfigError(f"{path}: expected a mapping")
    if "a" in entry:
        link = DerivedLink(
            a=_probability(entry, "a", path),
            b=_number(entry, "b", path),
            c=_number(entry, "c", path),
            tau_over_T=_number(entry, "tau_over_t", path),
        )
        return link, link
    rank1 = _probability(entry, "rank1", path)
    if "rank2" in entry:
        rank2 = _probability(entry, "rank2", path)
    else:
        ratio = _probability(entry, "rank2_over_rank1", path)
        rank2 = rank1 * ratio
    return DirectLink(rank1), DirectLink(rank2)


def parse_config(text: str, origin: str = "<config>") -> SystemConfig:
    """Parse and validate a scenario document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{origin}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{origin}: expected a mapping at the top level")

    known = {"arrivals", "primary_channel", "secondary_links", "relay_links"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"{origin}: unknown section(s) {sorted(unknown)}")

    arrivals = _require(doc, "arrivals", origin)
    primary = _require(doc, "primary_channel", origin)
    matrices = {}
    for section in ("secondary_links", "relay_links"):
        block = _require(doc, section, origin)
        pairs = [
            _parse_link_pair(_require(block, user, f"{origin}.{section}"),
                             f"{origin}.{section}.{user}")
            for user in ("s1", "s2")
        ]
        matrices[section] = (
            (pairs[0][0], pairs[1][0]),
            (pairs[0][1], pairs[1][1]),
        )

    try:
        return SystemConfig(
            lambda_p=_probability(arrivals, "lambda_p", f"{origin}.arrivals"),
            lambda_1=_probability(arrivals, "lambda_1", f"{origin}.arrivals"),
            lambda_2=_probability(arrivals, "lambda_2", f"{origin}.arrivals"),
            p_succ_primary=_probability(primary, "success", f"{origin}.primary_channel"),
            p_succ_p_to_s1=_probability(primary, "overheard_by_s1", f"{origin}.primary_channel"),
            p_succ_p_to_s2=_probability(primary, "overheard_by_s2", f"{origin}.primary_channel"),
            secondary_links=matrices["secondary_links"],
            relay_links=matrices["relay_links"],
        )
    except ConfigError as exc:
        raise ConfigError(f"{origin}: {exc}") from exc
