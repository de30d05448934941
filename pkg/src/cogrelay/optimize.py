"""Boundary tracing of stable-throughput regions by seeded multistart search.

The per-point problem is nonconvex but cheap: maximise the feasible own
arrival rate of user 1 over the policy box at a fixed lambda_2. Each start
runs a derivative-free compass search; starts come from a scrambled Halton
stream so results are reproducible and adding starts can only improve the
incumbent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from multiprocessing import Pool

import numpy as np
from scipy.stats import qmc

from .analysis import point_evaluator
from .model import Access, Policy, Scheme, SystemConfig, occupancy_ratio, primary_service_rate

__all__ = [
    "Region",
    "RegionSample",
    "SearchSettings",
    "boundary_sweep",
    "lambda2_upper_bound",
    "max_lambda1_given_lambda2",
    "max_lambda2_given_lambda1",
    "multistart_maximize",
    "region_union",
]

_MAX_EVALS_PER_START = 20000


@dataclass(frozen=True, slots=True)
class SearchSettings:
    """Knobs of the multistart search; defaults suit full region sweeps."""

    n_starts: int = 64
    seed: int = 0
    initial_step: float = 0.25
    shrink: float = 0.5
    step_tol: float = 1e-6
    tie_rho_to_epsilon: bool = False


@dataclass(frozen=True, slots=True)
class RegionSample:
    """One swept grid point; ``lambda_1_max is None`` marks infeasibility."""

    lambda_2: float
    lambda_1_max: float | None
    argmax: Policy | None


@dataclass(frozen=True, slots=True)
class Region:
    """A swept stability boundary, possibly the union of several schemes."""

    scheme_set: tuple[Scheme, ...]
    samples: tuple[RegionSample, ...]
    grid_resolution: float


def _normalized(objective):
    """Accept both plain float|None objectives and (value, gap) objectives."""
    def call(x):
        res = objective(x)
        if isinstance(res, tuple):
            return res
        if res is None:
            return None, math.inf
        return res, 0.0
    return call


def _clamp(value: float, lo: float, hi: float) -> float:
    return lo if value < lo else hi if value > hi else value


def _compass_search(func, x0, bounds, initial_step, shrink, step_tol):
    """One local search: drive infeasibility to zero, then climb the value.

    ``func(x) -> (value_or_None, gap)`` where ``gap == 0`` means feasible.
    Returns ``(value, x)`` or ``None`` when no feasible point was reached.
    """
    x = [_clamp(v, lo, hi) for v, (lo, hi) in zip(x0, bounds)]
    value, gap = func(x)
    evals = 1

    step = initial_step
    while gap > 0.0 and step >= step_tol and evals < _MAX_EVALS_PER_START:
        best_gap, best_x, best_val = gap, None, None
        for i, (lo, hi) in enumerate(bounds):
            for direction in (step, -step):
                xi = _clamp(x[i] + direction, lo, hi)
                if xi == x[i]:
                    continue
                cand = list(x)
                cand[i] = xi
                val_c, gap_c = func(cand)
                evals += 1
                if gap_c < best_gap:
                    best_gap, best_x, best_val = gap_c, cand, val_c
        if best_x is None:
            step *= shrink
        else:
            x, gap, value = best_x, best_gap, best_val
    if gap > 0.0:
        return None

    step = initial_step
    while step >= step_tol and evals < _MAX_EVALS_PER_START:
        best_val, best_x = value, None
        for i, (lo, hi) in enumerate(bounds):
            for direction in (step, -step):
                xi = _clamp(x[i] + direction, lo, hi)
                if xi == x[i]:
                    continue
                cand = list(x)
                cand[i] = xi
                val_c, gap_c = func(cand)
                evals += 1
                if gap_c == 0.0 and val_c is not None and val_c > best_val:
                    best_val, best_x = val_c, cand
        if best_x is None:
            step *= shrink
        else:
            x, value = best_x, best_val
    return value, x


def multistart_maximize(objective, bounds, n_starts, seed, *,
                        initial_step: float = 0.25, shrink: float = 0.5,
                        step_tol: float = 1e-6):
    """Best feasible local optimum over ``n_starts`` quasi-random starts.

    ``objective`` maps a point (list of floats within ``bounds``) either to a
    value (``None`` = rejected) or to a ``(value, infeasibility_gap)`` pair;
    a positive gap lets the search descend toward feasibility before
    climbing. Fully deterministic given ``seed``; the start stream is
    prefix-stable, so increasing ``n_starts`` never worsens the result.
    Returns ``(best_value, best_x)`` or ``None`` when every start fails.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    func = _normalized(objective)
    lows = np.array([lo for lo, _ in bounds])
    spans = np.array([hi - lo for lo, hi in bounds])
    halton = qmc.Halton(d=len(bounds), scramble=True,
                        seed=np.random.default_rng(seed))
    starts = lows + halton.random(n_starts) * spans

    best = None
    for row in starts:
        res = _compass_search(func, row.tolist(), bounds,
                              initial_step, shrink, step_tol)
        if res is None:
            continue
        if best is None or res[0] > best[0]:
            best = (res[0], tuple(res[1]))
    return best


# -- policy boxes -----------------------------------------------------------

_ORDERED_COOP_DIMS = ("epsilon", "rho", "p1", "p2", "f1", "f2")
_ORDERED_TIED_DIMS = ("epsilon", "p1", "p2", "f1", "f2")
_ORDERED_NONCOOP_DIMS = ("epsilon", "p1", "p2")
_RA_COOP_DIMS = ("rho", "p1", "p2", "f1", "f2", "alpha1", "alpha2")
_RA_NONCOOP_DIMS = ("p1", "p2", "alpha1", "alpha2")


def policy_dims(scheme: Scheme, tie_rho_to_epsilon: bool) -> tuple[str, ...]:
    """Names of the searchable policy coordinates for a scheme."""
    if scheme.access is Access.ORDERED:
        if scheme.noncooperative:
            return _ORDERED_NONCOOP_DIMS
        return _ORDERED_TIED_DIMS if tie_rho_to_epsilon else _ORDERED_COOP_DIMS
    return _RA_NONCOOP_DIMS if scheme.noncooperative else _RA_COOP_DIMS


def _policy_from_dims(dims, x, tie: bool) -> Policy:
    values = dict(zip(dims, x))
    eps = values.get("epsilon", 0.0)
    tied = tie and "epsilon" in dims and "rho" not in dims
    return Policy(
        epsilon=eps,
        rho=eps if tied else values.get("rho", 0.0),
        p1=values.get("p1", 0.0),
        p2=values.get("p2", 0.0),
        f1=values.get("f1", 0.0),
        f2=values.get("f2", 0.0),
        alpha1=values.get("alpha1", 0.0),
        alpha2=values.get("alpha2", 0.0),
        tie_rho_to_epsilon=tied,
    )


def lambda2_upper_bound(scheme: Scheme, cfg: SystemConfig) -> float:
    """Sound cap on feasible lambda_2 under a scheme, over every policy.

    mu_2 never exceeds pi_pe * s12 in any variant (selection and silence
    brackets are <= 1), and pi_pe is largest with full acceptance. Grid
    points beyond this cap are infeasible without searching.
    """
    if scheme.noncooperative:
        mu_p_max = cfg.p_succ_primary
    else:
        mu_p_max = primary_service_rate(cfg, Policy(f1=1.0, f2=1.0))
    if cfg.lambda_p > mu_p_max:
        return -1.0
    pi_max = 1.0 - occupancy_ratio(cfg.lambda_p, mu_p_max)
    return pi_max * cfg.secondary_success(1, 2)


def _seed_for(seed: int, scheme: Scheme, lambda_2: float) -> np.random.SeedSequence:
    # split the stream per (scheme, grid point) so parallel == serial
    bits = int(np.float64(lambda_2).view(np.uint64))
    return np.random.SeedSequence([seed, list(Scheme).index(scheme), bits])


def max_lambda1_given_lambda2(
    scheme: Scheme,
    cfg: SystemConfig,
    lambda_2: float,
    search: SearchSettings = SearchSettings(),
):
    """Largest feasible lambda_1 at the given lambda_2, with its policy.

    The objective evaluates the scheme with user 1's queue saturated: its
    service rate is then the supremum of feasible arrival rates, and the
    remaining queues' constraints are checked at that most loaded point.
    Returns ``(lambda_1_max, argmax_policy)`` or ``None`` when no start finds
    a feasible policy (lambda_2 exceeds the scheme's reach).
    """
    if not 0.0 <= lambda_2 <= 1.0:
        raise ValueError(f"lambda_2 {lambda_2!r} outside [0, 1]")
    if lambda_2 > lambda2_upper_bound(scheme, cfg):
        return None
    dims = policy_dims(scheme, search.tie_rho_to_epsilon)
    tie = search.tie_rho_to_epsilon
    evaluate = point_evaluator(scheme, cfg)
    index = {name: k for k, name in enumerate(dims)}
    i_eps = index.get("epsilon")
    i_rho = index.get("rho")
    i_p1, i_p2 = index.get("p1"), index.get("p2")
    i_f1, i_f2 = index.get("f1"), index.get("f2")
    i_a1, i_a2 = index.get("alpha1"), index.get("alpha2")
    tied = tie and i_eps is not None and i_rho is None

    def objective(x):
        eps = x[i_eps] if i_eps is not None else 0.0
        rho = eps if tied else (x[i_rho] if i_rho is not None else 0.0)
        res = evaluate(
            eps, rho,
            x[i_p1] if i_p1 is not None else 0.0,
            x[i_p2] if i_p2 is not None else 0.0,
            x[i_f1] if i_f1 is not None else 0.0,
            x[i_f2] if i_f2 is not None else 0.0,
            x[i_a1] if i_a1 is not None else 0.0,
            x[i_a2] if i_a2 is not None else 0.0,
            1.0, lambda_2,
        )
        # own-queue gap excluded: lambda_1 is the quantity being maximised
        gap = res[8] + res[10] + res[11] + res[12]
        if gap > 0.0:
            return None, gap
        return res[4], 0.0

    best = multistart_maximize(
        objective, [(0.0, 1.0)] * len(dims), search.n_starts,
        _seed_for(search.seed, scheme, lambda_2),
        initial_step=search.initial_step, shrink=search.shrink,
        step_tol=search.step_tol,
    )
    if best is None:
        return None
    value, x = best
    return value, _policy_from_dims(dims, x, tie)


def max_lambda2_given_lambda1(
    scheme: Scheme,
    cfg: SystemConfig,
    lambda_1: float,
    search: SearchSettings = SearchSettings(),
):
    """Mirror query (used for axis intercepts): swap the users and sweep."""
    res = max_lambda1_given_lambda2(scheme.mirrored, cfg.swapped(), lambda_1, search)
    if res is None:
        return None
    value, pol = res
    return value, pol.swapped()


# -- grid sweeps ------------------------------------------------------------

def _sweep_point(args):
    scheme_value, cfg, lambda_2, search = args
    scheme = Scheme(scheme_value)
    res = max_lambda1_given_lambda2(scheme, cfg, lambda_2, search)
    if res is None:
        return RegionSample(lambda_2, None, None)
    return RegionSample(lambda_2, res[0], res[1])


def grid_points(grid_step: float, lambda2_max: float = 1.0) -> list[float]:
    if grid_step <= 0.0:
        raise ValueError("grid step must be > 0")
    count = int(math.floor(lambda2_max / grid_step + 1e-9))
    return [k * grid_step for k in range(count + 1)]


_MONOTONE_TOL = 1e-3


def enforce_monotone_boundary(samples, scheme, cfg, search, rounds=2):
    """Retry grid points that break the non-increasing boundary shape.

    Within one scheme the true boundary cannot rise with lambda_2, so a
    sample that sits more than the tolerance below its right neighbour (or
    is infeasible while the neighbour is not) is a search failure; it is
    re-run with a larger prefix of the same start stream, which can only
    improve it. Deterministic given the original seed.
    """
    samples = list(samples)
    for attempt in range(1, rounds + 1):
        suspect = [
            i for i in range(len(samples) - 1)
            if samples[i + 1].lambda_1_max is not None
            and (samples[i].lambda_1_max is None
                 or samples[i].lambda_1_max
                 < samples[i + 1].lambda_1_max - _MONOTONE_TOL)
        ]
        if not suspect:
            break
        boosted = replace(search, n_starts=search.n_starts * 4 ** attempt)
        for i in suspect:
            res = max_lambda1_given_lambda2(scheme, cfg,
                                            samples[i].lambda_2, boosted)
            if res is not None and (samples[i].lambda_1_max is None
                                    or res[0] > samples[i].lambda_1_max):
                samples[i] = RegionSample(samples[i].lambda_2, res[0], res[1])
    return tuple(samples)


def sweep_scheme(
    scheme: Scheme,
    cfg: SystemConfig,
    grid_step: float = 0.005,
    search: SearchSettings = SearchSettings(),
    lambda2_max: float = 1.0,
    workers: int = 1,
) -> Region:
    """Trace one scheme's boundary over the lambda_2 grid."""
    grid = grid_points(grid_step, lambda2_max)
    tasks = [(scheme.value, cfg, l2, search) for l2 in grid]
    if workers > 1 and len(tasks) > 1:
        chunk = max(1, len(tasks) // (workers * 4))
        with Pool(workers) as pool:
            samples = list(pool.imap(_sweep_point, tasks, chunksize=chunk))
    else:
        samples = [_sweep_point(t) for t in tasks]
    samples = enforce_monotone_boundary(samples, scheme, cfg, search)
    return Region((scheme,), samples, grid_step)


def boundary_sweep(
    schemes,
    cfg: SystemConfig,
    grid_step: float = 0.005,
    search: SearchSettings = SearchSettings(),
    lambda2_max: float = 1.0,
    workers: int = 1,
) -> Region:
    """Sweep every requested scheme on a shared grid and union pointwise."""
    schemes = list(schemes)
    if not schemes:
        return Region((), (), grid_step)
    grid = grid_points(grid_step, lambda2_max)
    tasks = [(s.value, cfg, l2, search) for s in schemes for l2 in grid]
    if workers > 1 and len(tasks) > 1:
        chunk = max(1, len(tasks) // (workers * 4))
        with Pool(workers) as pool:
            flat = list(pool.imap(_sweep_point, tasks, chunksize=chunk))
    else:
        flat = [_sweep_point(t) for t in tasks]
    regions = []
    for k, scheme in enumerate(schemes):
        samples = enforce_monotone_boundary(
            flat[k * len(grid):(k + 1) * len(grid)], scheme, cfg, search)
        regions.append(Region((scheme,), samples, grid_step))
    return region_union(regions)


def region_union(regions) -> Region:
    """Pointwise max of boundaries; argmax policy comes from the winner.

    Regions on identical grids are combined directly; otherwise samples are
    linearly interpolated onto the finest grid (policies are taken from the
    nearest swept sample, interpolated heights have no exact argmax).
    """
    regions = [r for r in regions if r.samples]
    if not regions:
        return Region((), (), 0.0)
    if len(regions) == 1:
        return regions[0]

    grids = [tuple(s.lambda_2 for s in r.samples) for r in regions]
    if all(g == grids[0] for g in grids[1:]):
        target = grids[0]
        aligned = [r.samples for r in regions]
        step = min(r.grid_resolution for r in regions if r.grid_resolution > 0.0)
    else:
        finest = min(regions, key=lambda r: r.grid_resolution)
        target = tuple(s.lambda_2 for s in finest.samples)
        step = finest.grid_resolution
        aligned = [_resample(r, target) for r in regions]

    merged = []
    for k, lambda_2 in enumerate(target):
        best = None
        for samples in aligned:
            s = samples[k]
            if s.lambda_1_max is None:
                continue
            if best is None or s.lambda_1_max > best.lambda_1_max:
                best = s
        if best is None:
            merged.append(RegionSample(lambda_2, None, None))
        else:
            merged.append(RegionSample(lambda_2, best.lambda_1_max, best.argmax))

    scheme_set = []
    for r in regions:
        for s in r.scheme_set:
            if s not in scheme_set:
                scheme_set.append(s)
    return Region(tuple(scheme_set), tuple(merged), step)


def _resample(region: Region, target) -> tuple[RegionSample, ...]:
    defined = [(s.lambda_2, s.lambda_1_max, s.argmax) for s in region.samples
               if s.lambda_1_max is not None]
    if not defined:
        return tuple(RegionSample(l2, None, None) for l2 in target)
    xs = np.array([d[0] for d in defined])
    ys = np.array([d[1] for d in defined])
    out = []
    for l2 in target:
        if l2 < xs[0] or l2 > xs[-1]:
            out.append(RegionSample(l2, None, None))
            continue
        height = float(np.interp(l2, xs, ys))
        nearest = defined[int(np.argmin(np.abs(xs - l2)))]
        out.append(RegionSample(l2, height, nearest[2]))
    return tuple(out)
