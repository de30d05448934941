import math

import numpy as np
import pytest

from cogrelay import (
    Policy,
    Region,
    RegionSample,
    Scheme,
    SearchSettings,
    boundary_sweep,
    max_lambda1_given_lambda2,
    max_lambda2_given_lambda1,
    multistart_maximize,
    region_union,
)
from cogrelay.optimize import grid_points, lambda2_upper_bound, sweep_scheme

FAST = SearchSettings(n_starts=16, seed=0)


class TestMultistart:
    def test_constant_objective(self):
        best = multistart_maximize(lambda x: 2.5, [(0.0, 1.0)] * 2, 4, seed=1)
        assert best is not None
        assert best[0] == 2.5

    def test_concave_quadratic(self):
        best = multistart_maximize(lambda x: 1.0 - (x[0] - 0.3) ** 2,
                                   [(0.0, 1.0)], 8, seed=3)
        assert abs(best[1][0] - 0.3) <= 1e-5

    def test_rejection_drives_to_constraint_boundary(self):
        def objective(x):
            if x[0] > 0.37:
                return None, x[0] - 0.37
            return x[0], 0.0

        best = multistart_maximize(objective, [(0.0, 1.0)], 8, seed=5)
        assert best[0] == pytest.approx(0.37, abs=1e-5)

    def test_all_infeasible_returns_none(self):
        assert multistart_maximize(lambda x: None, [(0.0, 1.0)], 4, seed=0) is None

    def test_more_starts_never_worse(self):
        def bumpy(x):
            return math.sin(7 * x[0]) + math.cos(13 * x[1]) * 0.3

        few = multistart_maximize(bumpy, [(0.0, 1.0)] * 2, 4, seed=11)
        many = multistart_maximize(bumpy, [(0.0, 1.0)] * 2, 12, seed=11)
        assert many[0] >= few[0]


def _noncoop_dom1_grid_oracle(fig2, lambda_2, n=1_000_001):
    """Brute-force sweep over the ordering probability with the specialised
    closed forms (own-queue pick fixed at its best value p2=1)."""
    pi_pe = 1.0 - fig2.lambda_p / fig2.p_succ_primary
    s11 = fig2.secondary_success(1, 1)
    s12 = fig2.secondary_success(1, 2)
    eps = np.linspace(0.0, 1.0, n)
    mu_1 = pi_pe * s11 * eps
    mu_2 = pi_pe * s12 * (1.0 - eps)
    feasible = lambda_2 <= mu_2 - 1e-9 if lambda_2 > 0 else np.ones_like(eps, bool)
    if not np.any(feasible):
        return None
    return float(np.max(mu_1[feasible]))


class TestBoundaryPoints:
    def test_noncoop_corner_against_grid_oracle(self, fig2):
        oracle = _noncoop_dom1_grid_oracle(fig2, 0.0)
        res = max_lambda1_given_lambda2(Scheme.ORDERED_NONCOOP_DOM1, fig2, 0.0,
                                        SearchSettings(n_starts=32))
        assert oracle == pytest.approx(0.24, abs=1e-9)
        assert res[0] == pytest.approx(oracle, abs=1e-3)
        assert res[1].epsilon == pytest.approx(1.0, abs=1e-4)

    def test_noncoop_interior_against_grid_oracle(self, fig2):
        oracle = _noncoop_dom1_grid_oracle(fig2, 0.1)
        res = max_lambda1_given_lambda2(Scheme.ORDERED_NONCOOP_DOM1, fig2, 0.1,
                                        SearchSettings(n_starts=32))
        assert res[0] == pytest.approx(oracle, abs=1e-3)

    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_saturated_lambda2_is_infeasible(self, fig2, scheme):
        assert max_lambda1_given_lambda2(scheme, fig2, 1.0, FAST) is None

    def test_cooperative_corner_contains_noncoop(self, fig2):
        res = max_lambda1_given_lambda2(Scheme.ORDERED_INNER_DOM1, fig2, 0.0,
                                        SearchSettings(n_starts=32))
        assert res[0] >= 0.24 - 1e-3

    def test_mirrored_query_matches_swapped_sweep(self, fig2):
        direct = max_lambda2_given_lambda1(Scheme.ORDERED_NONCOOP_DOM2, fig2,
                                           0.0, SearchSettings(n_starts=32))
        # user-2 axis intercept of the noncooperative region
        assert direct[0] == pytest.approx(0.24, abs=1e-3)

    def test_upper_bound_prunes(self, fig2):
        bound = lambda2_upper_bound(Scheme.ORDERED_NONCOOP_DOM1, fig2)
        assert bound == pytest.approx(0.24, abs=1e-12)
        assert lambda2_upper_bound(Scheme.ORDERED_INNER_DOM1, fig2) > bound


class TestDeterminism:
    def test_point_query_bit_identical(self, fig2):
        a = max_lambda1_given_lambda2(Scheme.ORDERED_INNER_DOM1, fig2, 0.05, FAST)
        b = max_lambda1_given_lambda2(Scheme.ORDERED_INNER_DOM1, fig2, 0.05, FAST)
        assert a == b

    def test_sweep_bit_identical(self, fig2):
        kwargs = dict(grid_step=0.06, search=FAST, lambda2_max=0.24)
        a = sweep_scheme(Scheme.ORDERED_NONCOOP_DOM1, fig2, **kwargs)
        b = sweep_scheme(Scheme.ORDERED_NONCOOP_DOM1, fig2, **kwargs)
        assert a == b

    def test_parallel_matches_serial(self, fig2):
        kwargs = dict(grid_step=0.06, search=FAST, lambda2_max=0.24)
        serial = sweep_scheme(Scheme.ORDERED_NONCOOP_DOM1, fig2, **kwargs)
        parallel = sweep_scheme(Scheme.ORDERED_NONCOOP_DOM1, fig2, workers=2,
                                **kwargs)
        assert serial == parallel

    def test_more_starts_never_worsen_boundary(self, fig2):
        few = max_lambda1_given_lambda2(Scheme.ORDERED_INNER_DOM1, fig2, 0.1,
                                        SearchSettings(n_starts=8, seed=2))
        many = max_lambda1_given_lambda2(Scheme.ORDERED_INNER_DOM1, fig2, 0.1,
                                        SearchSettings(n_starts=24, seed=2))
        assert many[0] >= few[0]


class TestSweeps:
    def test_empty_scheme_list(self, fig2):
        region = boundary_sweep([], fig2, grid_step=0.1)
        assert region.scheme_set == ()
        assert region.samples == ()

    def test_single_point_grid_equals_point_query(self, fig2):
        region = boundary_sweep([Scheme.ORDERED_NONCOOP_DOM1], fig2,
                                grid_step=0.05, search=FAST, lambda2_max=0.0)
        assert len(region.samples) == 1
        point = max_lambda1_given_lambda2(Scheme.ORDERED_NONCOOP_DOM1, fig2,
                                          0.0, FAST)
        assert region.samples[0].lambda_1_max == point[0]
        assert region.samples[0].argmax == point[1]

    def test_boundary_monotone_in_lambda2(self, fig2):
        region = sweep_scheme(Scheme.ORDERED_NONCOOP_DOM1, fig2,
                              grid_step=0.03, search=SearchSettings(n_starts=24),
                              lambda2_max=0.24)
        heights = [s.lambda_1_max for s in region.samples
                   if s.lambda_1_max is not None]
        for left, right in zip(heights, heights[1:]):
            assert right <= left + 1e-3

    def test_infeasible_tail_recorded(self, fig2):
        region = sweep_scheme(Scheme.ORDERED_NONCOOP_DOM1, fig2,
                              grid_step=0.1, search=FAST, lambda2_max=0.5)
        tail = [s for s in region.samples if s.lambda_2 > 0.24]
        assert tail and all(s.lambda_1_max is None for s in tail)


class TestRegionUnion:
    def _mk(self, pairs, step=0.1, scheme=Scheme.ORDERED_NONCOOP_DOM1):
        samples = tuple(
            RegionSample(l2, h, None if h is None else Policy()) for l2, h in pairs)
        return Region((scheme,), samples, step)

    def test_union_with_self(self):
        region = self._mk([(0.0, 0.5), (0.1, 0.4)])
        assert region_union([region, region]) == region

    def test_union_with_empty(self):
        region = self._mk([(0.0, 0.5), (0.1, 0.4)])
        empty = Region((), (), 0.1)
        assert region_union([region, empty]) == region

    def test_pointwise_max_and_winner_policy(self):
        lo = Region((Scheme.ORDERED_NONCOOP_DOM1,),
                    (RegionSample(0.0, 0.3, Policy(epsilon=0.1)),
                     RegionSample(0.1, 0.25, Policy(epsilon=0.1))), 0.1)
        hi = Region((Scheme.ORDERED_NONCOOP_DOM2,),
                    (RegionSample(0.0, 0.4, Policy(epsilon=0.9)),
                     RegionSample(0.1, 0.2, Policy(epsilon=0.9))), 0.1)
        union = region_union([lo, hi])
        assert union.scheme_set == (Scheme.ORDERED_NONCOOP_DOM1,
                                    Scheme.ORDERED_NONCOOP_DOM2)
        assert union.samples[0].lambda_1_max == 0.4
        assert union.samples[0].argmax.epsilon == 0.9
        assert union.samples[1].lambda_1_max == 0.25
        assert union.samples[1].argmax.epsilon == 0.1

    def test_interpolating_union_on_mismatched_grids(self):
        coarse = self._mk([(0.0, 0.4), (0.2, 0.0)], step=0.2)
        fine = self._mk([(0.0, 0.1), (0.1, 0.1), (0.2, 0.1)], step=0.1,
                        scheme=Scheme.ORDERED_NONCOOP_DOM2)
        union = region_union([coarse, fine])
        assert [s.lambda_2 for s in union.samples] == [0.0, 0.1, 0.2]
        assert union.samples[0].lambda_1_max == pytest.approx(0.4)
        assert union.samples[1].lambda_1_max == pytest.approx(0.2)  # interpolated
        assert union.samples[2].lambda_1_max == pytest.approx(0.1)

    def test_grid_points_cover_range(self):
        pts = grid_points(0.005, 1.0)
        assert len(pts) == 201
        assert pts[0] == 0.0
        assert pts[-1] == pytest.approx(1.0, abs=1e-12)


class TestSymmetricConfig:
    def test_union_boundary_symmetric_under_user_swap(self, fig3):
        # fig3 is user-symmetric, so the unioned noncoop boundary must agree
        # with its mirrored query up to search noise
        search = SearchSettings(n_starts=24, seed=0)
        schemes = (Scheme.ORDERED_NONCOOP_DOM1, Scheme.ORDERED_NONCOOP_DOM2)
        for lam in (0.0, 0.1, 0.2):
            direct = max(
                (r[0] for r in (max_lambda1_given_lambda2(s, fig3, lam, search)
                                for s in schemes) if r is not None),
                default=None)
            mirrored = max(
                (r[0] for r in (max_lambda2_given_lambda1(s, fig3, lam, search)
                                for s in schemes) if r is not None),
                default=None)
            assert direct is not None and mirrored is not None
            assert direct == pytest.approx(mirrored, abs=2e-3)


class TestMonotoneEnforcement:
    def test_retry_lifts_underestimated_point(self, fig2):
        from cogrelay.optimize import RegionSample, enforce_monotone_boundary

        search = SearchSettings(n_starts=16, seed=0)
        good = max_lambda1_given_lambda2(Scheme.ORDERED_NONCOOP_DOM1, fig2,
                                         0.05, search)
        samples = (
            RegionSample(0.0, 0.01, Policy()),          # artificially too low
            RegionSample(0.05, good[0], good[1]),
        )
        fixed = enforce_monotone_boundary(
            samples, Scheme.ORDERED_NONCOOP_DOM1, fig2, search)
        assert fixed[0].lambda_1_max >= fixed[1].lambda_1_max - 1e-3
        assert fixed[0].lambda_1_max == pytest.approx(0.24, abs=1e-3)
        assert fixed[1] == samples[1]


class TestTiedRho:
    def test_tied_boundary_never_exceeds_free(self, fig2):
        free = max_lambda1_given_lambda2(
            Scheme.ORDERED_INNER_DOM1, fig2, 0.1,
            SearchSettings(n_starts=24, seed=1))
        tied = max_lambda1_given_lambda2(
            Scheme.ORDERED_INNER_DOM1, fig2, 0.1,
            SearchSettings(n_starts=24, seed=1, tie_rho_to_epsilon=True))
        assert tied[0] <= free[0] + 1e-3
        assert tied[1].tie_rho_to_epsilon
        assert tied[1].rho == tied[1].epsilon
