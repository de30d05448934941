"""Command-line front end: region sweeps, single simulations, cross-checks.

Outputs are plain CSV / key-value text with a JSON metadata sidecar; nothing
carries wall-clock state, so a fixed seed reproduces byte-identical files.

Exit codes: 0 success, 2 configuration/usage parse failure, 3 infeasible
primary load, 4 validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import STABILITY_SLACK
from .configs import config_digest, load_config
from .model import (
    Access,
    ConfigError,
    InfeasiblePrimaryError,
    Policy,
    Scheme,
    primary_empty_prob,
    primary_service_rate,
    relay_arrival_rates,
)
from .optimize import (
    Region,
    RegionSample,
    SearchSettings,
    _sweep_point,
    enforce_monotone_boundary,
    grid_points,
    policy_dims,
    region_union,
)
from .simulate import (
    Verdict,
    rate_standard_error,
    ratio_standard_error,
    simulate,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INFEASIBLE_PRIMARY = 3
EXIT_VALIDATION = 4

CSV_HEADER = "lambda2,lambda1_max,scheme,eps,rho,p1,p2,f1,f2,alpha1,alpha2"
_POLICY_COLUMNS = ("epsilon", "rho", "p1", "p2", "f1", "f2", "alpha1", "alpha2")


@dataclass(frozen=True)
class ExperimentSpec:
    """Resolved, validated settings of one sweep/validation invocation."""

    config: str
    schemes: tuple[Scheme, ...]
    grid_step: float
    lambda2_max: float
    search: SearchSettings
    workers: int
    slots: int = 400_000
    union: bool = False

    def __post_init__(self) -> None:
        if self.grid_step <= 0.0:
            raise ConfigError(f"grid step must be > 0, got {self.grid_step!r}")
        if self.slots < 1:
            raise ConfigError(f"slots must be >= 1, got {self.slots!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers!r}")


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(value)


def _region_rows(region_id: str, sample: RegionSample, columns) -> str:
    fields = [repr(sample.lambda_2), _fmt(sample.lambda_1_max), region_id]
    pol = sample.argmax
    for name in _POLICY_COLUMNS:
        if pol is None or name not in columns:
            fields.append("")
        else:
            fields.append(repr(getattr(pol, name)))
    return ",".join(fields) + "\n"


def write_region_csv(fh, regions: dict[str, Region], tie: bool) -> None:
    """Emit the pinned-header CSV for a set of named regions."""
    fh.write(CSV_HEADER + "\n")
    for region_id, region in regions.items():
        columns = _columns_for(region, tie)
        for sample in region.samples:
            fh.write(_region_rows(region_id, sample, columns))


def _columns_for(region: Region, tie: bool) -> set[str]:
    columns: set[str] = set()
    for scheme in region.scheme_set:
        columns.update(policy_dims(scheme, tie))
    return columns


def parse_region_csv(csv_path: str | Path, meta_path: str | Path | None = None):
    """Reconstruct the swept regions from an emitted CSV (+ sidecar)."""
    meta = None
    if meta_path is not None:
        meta = json.loads(Path(meta_path).read_text())
    tie = bool(meta["tie_rho_to_epsilon"]) if meta else False
    grid_step = float(meta["grid_step"]) if meta else 0.0

    groups: dict[str, list[RegionSample]] = {}
    lines = Path(csv_path).read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError(f"{csv_path}: unexpected CSV header")
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 11:
            raise ConfigError(f"{csv_path}: malformed row {line!r}")
        lambda_2 = float(parts[0])
        region_id = parts[2]
        if parts[1] == "":
            sample = RegionSample(lambda_2, None, None)
        else:
            values = {}
            for name, cell in zip(_POLICY_COLUMNS, parts[3:]):
                values[name] = float(cell) if cell else 0.0
            pol = Policy(**values, tie_rho_to_epsilon=tie)
            sample = RegionSample(lambda_2, float(parts[1]), pol)
        groups.setdefault(region_id, []).append(sample)

    regions = {}
    for region_id, samples in groups.items():
        if meta and region_id in meta.get("regions", {}):
            names = meta["regions"][region_id]["scheme_set"]
        elif region_id == "union":
            names = []
        else:
            names = region_id.split("+")
        scheme_set = tuple(Scheme(n) for n in names)
        regions[region_id] = Region(scheme_set, tuple(samples), grid_step)
    return regions


def _parse_schemes(text: str) -> list[Scheme]:
    names = [n.strip() for n in text.split(",") if n.strip()]
    schemes = []
    for name in names:
        try:
            schemes.append(Scheme(name))
        except ValueError:
            valid = ", ".join(s.value for s in Scheme)
            raise ConfigError(f"unknown scheme '{name}'; valid: {valid}")
    return schemes


def cmd_region(args) -> int:
    cfg = load_config(args.config)
    spec = ExperimentSpec(
        config=str(args.config),
        schemes=tuple(_parse_schemes(args.schemes)) if args.schemes else (),
        grid_step=args.grid_step,
        lambda2_max=args.lambda2_max,
        search=SearchSettings(n_starts=args.n_starts, seed=args.seed,
                              tie_rho_to_epsilon=args.tie_rho),
        workers=args.workers,
        union=bool(args.union),
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "regions.csv"
    meta_path = out_dir / "regions.meta.json"

    grid = grid_points(spec.grid_step, spec.lambda2_max)
    tasks = [(s.value, cfg, l2, spec.search) for s in spec.schemes for l2 in grid]
    per_scheme: dict[Scheme, list[RegionSample]] = {s: [] for s in spec.schemes}

    # rows stream to disk as they arrive so an interrupt still leaves data;
    # a completed run rewrites the file canonically (with the monotone
    # retries applied and union rows appended)
    partial = False
    with open(csv_path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        try:
            if spec.workers > 1 and len(tasks) > 1:
                chunk = max(1, len(tasks) // (spec.workers * 4))
                with Pool(spec.workers) as pool:
                    results = pool.imap(_sweep_point, tasks, chunksize=chunk)
                    _stream_rows(fh, results, tasks, per_scheme, spec.search)
            else:
                results = map(_sweep_point, tasks)
                _stream_rows(fh, results, tasks, per_scheme, spec.search)
        except KeyboardInterrupt:
            partial = True
    regions = {}
    if not partial:
        regions = {
            s.value: Region(
                (s,),
                enforce_monotone_boundary(samples, s, cfg, spec.search),
                spec.grid_step)
            for s, samples in per_scheme.items()
        }
        if spec.union and regions:
            regions["union"] = region_union(list(regions.values()))
        with open(csv_path, "w") as fh:
            write_region_csv(fh, regions, spec.search.tie_rho_to_epsilon)

    meta = {
        "command": "region",
        "version": __version__,
        "config": spec.config,
        "config_sha256": config_digest(args.config),
        "grid_step": spec.grid_step,
        "lambda2_max": spec.lambda2_max,
        "n_starts": spec.search.n_starts,
        "seed": spec.search.seed,
        "tie_rho_to_epsilon": spec.search.tie_rho_to_epsilon,
        "union": spec.union,
        "stability_slack": STABILITY_SLACK,
        "step_tol": spec.search.step_tol,
        "partial": partial,
        "regions": {
            region_id: {"scheme_set": [s.value for s in region.scheme_set]}
            for region_id, region in regions.items()
        },
    }
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    if partial:
        print("interrupted: partial results flushed", file=sys.stderr)
        return 130
    print(f"wrote {csv_path} and {meta_path}")
    return EXIT_OK


def _stream_rows(fh, results, tasks, per_scheme, search) -> None:
    columns_by_scheme = {
        s: set(policy_dims(s, search.tie_rho_to_epsilon)) for s in per_scheme
    }
    for (scheme_value, _, _, _), sample in zip(tasks, results):
        scheme = Scheme(scheme_value)
        per_scheme[scheme].append(sample)
        fh.write(_region_rows(scheme_value, sample, columns_by_scheme[scheme]))
        fh.flush()


def _policy_from_args(args) -> Policy:
    return Policy(
        epsilon=args.eps, rho=args.rho, p1=args.p1, p2=args.p2,
        f1=args.f1, f2=args.f2, alpha1=args.alpha1, alpha2=args.alpha2,
        tie_rho_to_epsilon=args.tie_rho,
    )


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    pol = _policy_from_args(args)
    if args.variant == "original":
        variant = None
        access = Access(args.access)
    else:
        variant = Scheme(args.variant)
        access = variant.access
        if variant.noncooperative:
            pol = pol.without_cooperation()

    mu_p = primary_service_rate(cfg, pol)
    primary_infeasible = cfg.lambda_p > mu_p

    stats = simulate(
        cfg, pol, args.lambda1, args.lambda2, variant=variant, access=access,
        slots=args.slots, seed=args.seed, trace_slots=args.trace,
    )

    lines = [
        ("command", "simulate"),
        ("config", str(args.config)),
        ("config_sha256", config_digest(args.config)),
        ("variant", args.variant),
        ("access", access.value),
        ("slots", args.slots),
        ("seed", args.seed),
        ("lambda_p", repr(cfg.lambda_p)),
        ("lambda_1", repr(args.lambda1)),
        ("lambda_2", repr(args.lambda2)),
    ]
    for name in _POLICY_COLUMNS:
        lines.append((f"policy.{name}", repr(getattr(pol, name))))
    lines.append(("primary_infeasible", str(primary_infeasible).lower()))

    bc = stats.batch_counts
    bs = stats.batch_slots
    lines.append(("analytic.mu_p", repr(mu_p)))
    lines.append(("empirical.mu_p", repr(stats.empirical_mu_p)))
    se_mu_p = ratio_standard_error(bc[:, 5], bc[:, 11])
    lines.append(("delta_se.mu_p", repr(_delta(stats.empirical_mu_p, mu_p, se_mu_p))))

    if not primary_infeasible:
        pi_pe = primary_empty_prob(cfg.lambda_p, mu_p)
        l1r, l2r = relay_arrival_rates(cfg, pol, pi_pe)
        lines.append(("analytic.pi_pe", repr(pi_pe)))
        for label, analytic, col in (("lambda_1r", l1r, 3), ("lambda_2r", l2r, 4)):
            emp = stats.empirical_relay_arrivals[0 if col == 3 else 1]
            se = rate_standard_error(bc[:, col], bs)
            lines.append((f"analytic.{label}", repr(analytic)))
            lines.append((f"empirical.{label}", repr(emp)))
            lines.append((f"delta_se.{label}", repr(_delta(emp, analytic, se))))
        throughput_refs = {
            "p": cfg.lambda_p, "q1": args.lambda1, "q2": args.lambda2,
            "q1r": l1r, "q2r": l2r,
        }
        dep_cols = {"p": 5, "q1": 7, "q2": 8, "q1r": 9, "q2r": 10}
        for name, ref in throughput_refs.items():
            emp = stats.queues[name].departures / stats.slots
            se = rate_standard_error(bc[:, dep_cols[name]], bs)
            lines.append((f"analytic.throughput.{name}", repr(ref)))
            lines.append((f"empirical.throughput.{name}", repr(emp)))
            lines.append((f"delta_se.throughput.{name}", repr(_delta(emp, ref, se))))

    for name, q in stats.queues.items():
        lines.append((f"queue.{name}.arrivals", q.arrivals))
        lines.append((f"queue.{name}.departures", q.departures))
        lines.append((f"queue.{name}.final_len", q.final_len))
        lines.append((f"queue.{name}.mean_len", repr(q.mean_len)))
        lines.append((f"queue.{name}.drift", repr(q.drift)))
    lines.append(("busy_slots_p", stats.busy_slots_p))
    lines.append(("direct_successes", stats.direct_successes))
    lines.append(("verdict", stats.verdict.value))

    report = "".join(f"{key}={value}\n" for key, value in lines)
    sys.stdout.write(report)
    if args.out:
        Path(args.out).write_text(report)
    if args.trace and args.trace_out:
        with open(args.trace_out, "w") as fh:
            for record in stats.trace or []:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
    return EXIT_INFEASIBLE_PRIMARY if primary_infeasible else EXIT_OK


def _delta(empirical: float, analytic: float, se: float) -> float:
    diff = empirical - analytic
    if diff == 0.0:
        return 0.0
    if se == 0.0 or not np.isfinite(se):
        return float("inf") if diff > 0 else float("-inf")
    return diff / se


def _inner_outer_schemes(access: Access) -> tuple[list[Scheme], list[Scheme]]:
    if access is Access.ORDERED:
        return ([Scheme.ORDERED_INNER_DOM1, Scheme.ORDERED_INNER_DOM2],
                [Scheme.ORDERED_OUTER_DOM1, Scheme.ORDERED_OUTER_DOM2])
    return ([Scheme.RA_INNER_DOM1, Scheme.RA_INNER_DOM2],
            [Scheme.RA_OUTER_DOM1, Scheme.RA_OUTER_DOM2])


def _sweep_region(schemes, cfg, spec: ExperimentSpec) -> Region:
    grid = grid_points(spec.grid_step, spec.lambda2_max)
    tasks = [(s.value, cfg, l2, spec.search) for s in schemes for l2 in grid]
    if spec.workers > 1 and len(tasks) > 1:
        chunk = max(1, len(tasks) // (spec.workers * 4))
        with Pool(spec.workers) as pool:
            flat = list(pool.imap(_sweep_point, tasks, chunksize=chunk))
    else:
        flat = [_sweep_point(t) for t in tasks]
    regions = [
        Region((s,),
               enforce_monotone_boundary(
                   flat[k * len(grid):(k + 1) * len(grid)], s, cfg, spec.search),
               spec.grid_step)
        for k, s in enumerate(schemes)
    ]
    return region_union(regions)


def cmd_validate(args) -> int:
    """Cross-validate the analytical bounds against coupled simulations.

    Simulates K points sampled inside the inner bound (expected stable) and K
    points pushed past the outer bound (expected unstable).
    """
    cfg = load_config(args.config)
    access = Access(args.access)
    inner_schemes, outer_schemes = _inner_outer_schemes(access)
    spec = ExperimentSpec(
        config=str(args.config),
        schemes=tuple(inner_schemes + outer_schemes),
        grid_step=args.grid_step,
        lambda2_max=args.lambda2_max,
        search=SearchSettings(n_starts=args.n_starts, seed=args.seed),
        workers=args.workers,
        slots=args.slots,
    )

    lines = [
        ("command", "validate"),
        ("config", str(args.config)),
        ("config_sha256", config_digest(args.config)),
        ("access", access.value),
        ("k", args.k),
        ("slots", args.slots),
        ("seed", args.seed),
        ("inner_margin", repr(args.inner_margin)),
        ("exterior_factor", repr(args.exterior_factor)),
        ("exterior_margin", repr(args.exterior_margin)),
    ]

    failures = 0
    inner_stable = 0
    exterior_unstable = 0
    exterior_inconclusive = 0
    n_inner = n_exterior = 0

    if args.k > 0:
        inner = _sweep_region(inner_schemes, cfg, spec)
        outer = _sweep_region(outer_schemes, cfg, spec)
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0x76616c]))

        inner_pts = _pick_points(inner, args.k, rng)
        exterior_pts = _pick_points(outer, args.k, rng)
        n_inner, n_exterior = len(inner_pts), len(exterior_pts)

        for i, sample in enumerate(inner_pts):
            lambda_1 = args.inner_margin * sample.lambda_1_max
            stats = simulate(cfg, sample.argmax, lambda_1, sample.lambda_2,
                             variant=None, access=access, slots=args.slots,
                             seed=args.seed + 101 + i)
            verdict = stats.verdict
            inner_stable += verdict is Verdict.STABLE
            failures += verdict is not Verdict.STABLE
            lines.append((
                f"inner[{i}]",
                f"lambda2={sample.lambda_2!r} lambda1={lambda_1!r} verdict={verdict.value}",
            ))
        for i, sample in enumerate(exterior_pts):
            lambda_1 = min(1.0, args.exterior_factor * sample.lambda_1_max
                           + args.exterior_margin)
            stats = simulate(cfg, sample.argmax, lambda_1, sample.lambda_2,
                             variant=None, access=access, slots=args.slots,
                             seed=args.seed + 501 + i)
            verdict = stats.verdict
            exterior_unstable += verdict is Verdict.UNSTABLE
            exterior_inconclusive += verdict is Verdict.INCONCLUSIVE
            lines.append((
                f"exterior[{i}]",
                f"lambda2={sample.lambda_2!r} lambda1={lambda_1!r} verdict={verdict.value}",
            ))

    lines.append(("summary.inner_stable", f"{inner_stable}/{n_inner}"))
    lines.append(("summary.exterior_unstable", f"{exterior_unstable}/{n_exterior}"))
    lines.append(("summary.exterior_inconclusive",
                  f"{exterior_inconclusive}/{n_exterior}"))
    lines.append(("result", "FAIL" if failures else "PASS"))

    report = "".join(f"{key}={value}\n" for key, value in lines)
    sys.stdout.write(report)
    if args.out:
        Path(args.out).write_text(report)
    return EXIT_VALIDATION if failures else EXIT_OK


def _pick_points(region: Region, k: int, rng) -> list[RegionSample]:
    candidates = [s for s in region.samples
                  if s.lambda_1_max is not None and s.lambda_1_max >= 0.02]
    if not candidates:
        return []
    k = min(k, len(candidates))
    idx = sorted(rng.choice(len(candidates), size=k, replace=False).tolist())
    return [candidates[i] for i in idx]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cogrelay",
        description="Stable-throughput regions of a cooperative cognitive "
                    "relaying network, with slot-level simulation cross-checks.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True,
                        help="bundled name (fig2/fig3/fig4) or path to a YAML file")
    common.add_argument("--seed", type=int, default=0)

    p_region = sub.add_parser("region", parents=[common],
                              help="sweep stability boundaries to CSV")
    p_region.add_argument("--schemes", default="",
                          help="comma-separated scheme names (empty: header-only CSV)")
    p_region.add_argument("--union", action="store_true",
                          help="also emit the pointwise union of the swept schemes")
    p_region.add_argument("--grid-step", type=float, default=0.005)
    p_region.add_argument("--lambda2-max", type=float, default=1.0)
    p_region.add_argument("--n-starts", type=int, default=64)
    p_region.add_argument("--tie-rho", action="store_true",
                          help="tie the decode-order probability to the access order")
    p_region.add_argument("--workers", type=int, default=1)
    p_region.add_argument("--out", default="out")
    p_region.set_defaults(func=cmd_region)

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="run one slot-level simulation and report rates")
    p_sim.add_argument("--lambda1", type=float, required=True)
    p_sim.add_argument("--lambda2", type=float, required=True)
    p_sim.add_argument("--variant", default="original",
                       help="'original' or a scheme name for its decoupled system")
    p_sim.add_argument("--access", default="ordered",
                       choices=[a.value for a in Access])
    p_sim.add_argument("--slots", type=int, default=1_000_000)
    p_sim.add_argument("--eps", type=float, default=0.5)
    p_sim.add_argument("--rho", type=float, default=0.5)
    p_sim.add_argument("--p1", type=float, default=0.5)
    p_sim.add_argument("--p2", type=float, default=0.5)
    p_sim.add_argument("--f1", type=float, default=0.0)
    p_sim.add_argument("--f2", type=float, default=0.0)
    p_sim.add_argument("--alpha1", type=float, default=0.5)
    p_sim.add_argument("--alpha2", type=float, default=0.5)
    p_sim.add_argument("--tie-rho", action="store_true")
    p_sim.add_argument("--trace", type=int, default=0,
                       help="record the first N slots")
    p_sim.add_argument("--trace-out", default="",
                       help="write the recorded slots as JSON lines")
    p_sim.add_argument("--out", default="",
                       help="also write the report to this file")
    p_sim.set_defaults(func=cmd_simulate)

    p_val = sub.add_parser("validate", parents=[common],
                           help="simulate sampled interior/exterior points")
    p_val.add_argument("--access", default="ordered",
                       choices=[a.value for a in Access])
    p_val.add_argument("--k", type=int, default=10)
    p_val.add_argument("--slots", type=int, default=400_000)
    p_val.add_argument("--grid-step", type=float, default=0.01)
    p_val.add_argument("--lambda2-max", type=float, default=1.0)
    p_val.add_argument("--n-starts", type=int, default=32)
    p_val.add_argument("--inner-margin", type=float, default=0.8)
    p_val.add_argument("--exterior-factor", type=float, default=1.1)
    p_val.add_argument("--exterior-margin", type=float, default=0.01)
    p_val.add_argument("--workers", type=int, default=1)
    p_val.add_argument("--out", default="")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InfeasiblePrimaryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE_PRIMARY
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
