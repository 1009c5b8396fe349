import math

import numpy as np
import pytest

from pairvar.errors import DomainError, NumericalError
from pairvar.intervals import (
    ConfidenceSet,
    chi2_1_quantile,
    chi2_1_sf,
    chi2_2_quantile,
    ci_diff_bonferroni,
    ci_diff_naive,
    ci_diff_region,
    ci_mu_exact,
    ci_mu_naive,
    difference_pivot,
    exact_pivot_crossings,
    normal_quantile,
    ratio_scale,
    bounded_hulls,
)
from pairvar.model import VarianceForm, VarianceModel

POOLED = VarianceModel(VarianceForm.EXP_LINEAR, (4.84, -0.927))
BOUNDS = (7.3, 13.9)

TABLE_ROWS = [
    (10.21, 10.78, (0.41, 0.76)),
    (13.62, 11.89, (5.05, 6.36)),
    (11.19, 9.92, (2.66, 5.05)),
    (10.83, 9.80, (2.03, 4.10)),
    (11.45, 13.36, (0.13, 0.17)),
]


class TestQuantiles:
    def test_normal_quantile(self):
        assert normal_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-10)
        assert normal_quantile(0.5) == 0.0

    def test_chi2_quantiles(self):
        # chi-squared(1) quantile is the squared normal quantile
        assert chi2_1_quantile(0.95) == pytest.approx(3.841458820694124, abs=1e-10)
        assert chi2_2_quantile(0.95) == pytest.approx(-2.0 * math.log(0.05), abs=1e-12)

    def test_tail_is_quantile_inverse(self):
        for p in (0.5, 0.9, 0.99, 0.999999):
            assert chi2_1_sf(chi2_1_quantile(p)) == pytest.approx(1 - p, rel=1e-9)

    def test_domain_errors(self):
        for fn in (normal_quantile, chi2_1_quantile, chi2_2_quantile):
            with pytest.raises(DomainError):
                fn(0.0)
            with pytest.raises(DomainError):
                fn(1.0)


class TestExactSet:
    def test_observation_always_covered_prebounding(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            y = float(rng.uniform(5, 15))
            t1 = float(rng.uniform(2, 6))
            t2 = float(rng.uniform(-1.5, -0.2))
            cs = ci_mu_exact(y, VarianceModel(VarianceForm.EXP_LINEAR, (t1, t2)),
                             alpha=float(rng.uniform(0.01, 0.2)))
            assert cs.contains(y)

    def test_two_components_then_bounded_single(self):
        # local max at mu* = y + 2/t2 = 5.84250; pivot there is 8.28045 > 3.84,
        # so the unbounded set splits; bounding to [7.3, 13.9] removes the
        # lower branch (values frozen from 40-digit arithmetic)
        cs = ci_mu_exact(8.0, POOLED, 0.05)
        assert cs.disconnected
        assert cs.components[0][0] == -math.inf
        assert cs.components[0][1] < 5.84250269687163 < cs.components[1][0]
        bounded = ci_mu_exact(8.0, POOLED, 0.05, bounds=BOUNDS)
        assert not bounded.disconnected
        assert bounded.components[0][0] == 7.3

    def test_endpoint_residuals(self):
        q = chi2_1_quantile(0.95)
        for y in (7.3, 9.0, 11.5, 13.9):
            cs = ci_mu_exact(y, POOLED, 0.05)
            for lo, hi in cs.components:
                for e in (lo, hi):
                    if math.isfinite(e):
                        g = (y - e) ** 2 / float(POOLED(e))
                        assert abs(g - q) <= 1e-8

    def test_one_sided_case(self):
        # a large variance at the observation keeps the interior maximum
        # under the quantile: the set is one unbounded interval
        m = VarianceModel(VarianceForm.EXP_LINEAR, (6.0, -0.5))
        cs = ci_mu_exact(10.0, m, 0.05)
        assert not cs.disconnected
        assert cs.components[0][0] == -math.inf
        assert cs.components[0][1] > 10.0

    def test_alpha_validated(self):
        with pytest.raises(DomainError):
            ci_mu_exact(8.0, POOLED, 0.0)
        with pytest.raises(DomainError):
            ci_mu_exact(8.0, POOLED, 1.5)

    def test_grid_fallback_for_positive_slope(self):
        m = VarianceModel(VarianceForm.EXP_LINEAR, (-8.0, 0.4))
        cs = ci_mu_exact(10.0, m, 0.05, bounds=BOUNDS)
        assert cs.approximate
        assert cs.contains(10.0)
        with pytest.raises(DomainError):
            ci_mu_exact(10.0, m, 0.05)  # unbounded grid impossible

    def test_empty_after_bounding_raises(self):
        with pytest.raises(NumericalError):
            ci_mu_exact(20.0, POOLED, 0.05, bounds=(7.3, 8.0))

    def test_vectorized_crossings_match_scalar_sets(self):
        rng = np.random.default_rng(42)
        y = rng.uniform(7.0, 14.0, 200)
        q = chi2_1_quantile(0.95)
        c = exact_pivot_crossings(y, 4.84, -0.927, q)
        for i in range(0, 200, 17):
            cs = ci_mu_exact(float(y[i]), POOLED, 0.05)
            if c.two_sided[i]:
                assert cs.disconnected
                assert cs.components[0][1] == pytest.approx(c.r1[i], abs=1e-9)
                assert cs.components[1] == pytest.approx((c.l2[i], c.r2[i]),
                                                         abs=1e-9)
            else:
                assert not cs.disconnected
                assert cs.components[0][1] == pytest.approx(c.r1[i], abs=1e-9)


class TestNaiveSingle:
    def test_unit_variance(self):
        m = VarianceModel(VarianceForm.EXP_LINEAR, (0.0, 0.0))
        lo, hi = ci_mu_naive(3.0, m, 0.05)
        assert lo == pytest.approx(3.0 - 1.959963984540054, abs=1e-9)
        assert hi == pytest.approx(3.0 + 1.959963984540054, abs=1e-9)

    def test_width_shrinks_to_zero(self):
        widths = [ci_mu_naive(10.21, POOLED, a)[1] - ci_mu_naive(10.21, POOLED, a)[0]
                  for a in (0.05, 0.5, 0.99, 0.9999)]
        assert all(w1 > w2 for w1, w2 in zip(widths, widths[1:]))
        assert widths[-1] < 1e-3

    def test_frozen_example(self):
        lo, hi = ci_mu_naive(10.21, POOLED, 0.05)
        half = (hi - lo) / 2
        assert half == pytest.approx(0.19409473736935317, rel=1e-10)


class TestDifferenceRegion:
    def test_table_rows_with_reference_protocol(self):
        # the reference endpoints correspond to a 0.01-step scan reported at
        # the accepted grid extremes; all five rows then match to 2 decimals
        for y1, y2, ref in TABLE_ROWS:
            cs = ci_diff_region(y1, y2, POOLED, 0.05, BOUNDS, grid_res=0.01,
                                refine_boundaries=False)
            lo, hi = ratio_scale(cs.hull)
            assert abs(lo - ref[0]) <= 0.01
            assert abs(hi - ref[1]) <= 0.01

    def test_refined_boundary_contains_grid_extremes(self):
        raw = ci_diff_region(10.21, 10.78, POOLED, 0.05, BOUNDS, 0.01,
                             refine_boundaries=False)
        ref = ci_diff_region(10.21, 10.78, POOLED, 0.05, BOUNDS, 0.01)
        assert ref.hull[0] <= raw.hull[0]
        assert ref.hull[1] >= raw.hull[1]
        assert ref.hull[0] == pytest.approx(raw.hull[0], abs=0.01)
        assert ref.hull[1] == pytest.approx(raw.hull[1], abs=0.01)

    def test_swap_negates_the_set(self):
        a = ci_diff_region(10.21, 10.78, POOLED, 0.05, BOUNDS, 0.01)
        b = ci_diff_region(10.78, 10.21, POOLED, 0.05, BOUNDS, 0.01)
        assert a.hull[0] == pytest.approx(-b.hull[1], abs=1e-6)
        assert a.hull[1] == pytest.approx(-b.hull[0], abs=1e-6)

    def test_grid_refinement_stability(self):
        coarse = ci_diff_region(10.21, 10.78, POOLED, 0.05, BOUNDS, 0.02,
                                refine_boundaries=False)
        fine = ci_diff_region(10.21, 10.78, POOLED, 0.05, BOUNDS, 0.01,
                              refine_boundaries=False)
        assert abs(coarse.hull[0] - fine.hull[0]) < 2 * 0.02
        assert abs(coarse.hull[1] - fine.hull[1]) < 2 * 0.02

    def test_rho_zero_at_equal_means(self):
        dp = difference_pivot(10.0, 11.0, POOLED, 0.0, 20.0)
        assert dp.rho == 0.0
        assert dp.g_quad >= 0.0

    def test_rho_formula(self):
        dp = difference_pivot(10.0, 11.0, POOLED, 1.0, 21.0)
        h1 = float(POOLED(11.0))
        h2 = float(POOLED(10.0))
        assert dp.rho == pytest.approx((h1 - h2) / (h1 + h2), rel=1e-12)

    def test_joint_region_is_exact_at_true_parameters(self):
        # the quadratic form at the true (difference, sum) is chi-squared
        # with 2 df, so the region covers the truth at exactly its level
        rng = np.random.default_rng(99)
        n = 10**5
        mu1, mu2 = 9.0, 10.5
        y1 = rng.normal(mu1, np.sqrt(float(POOLED(mu1))), n)
        y2 = rng.normal(mu2, np.sqrt(float(POOLED(mu2))), n)
        from pairvar.intervals import _quad_form
        _, _, _, quad = _quad_form(y1, y2, POOLED, mu1 - mu2, mu1 + mu2)
        coverage = np.mean(quad <= chi2_2_quantile(0.95))
        assert coverage == pytest.approx(0.95, abs=0.006)

    def test_validation(self):
        with pytest.raises(DomainError):
            ci_diff_region(10.0, 10.5, POOLED, 0.05, BOUNDS, grid_res=0.0)
        with pytest.raises(DomainError):
            ci_diff_region(10.0, 10.5, POOLED, 0.05, (7.3, math.inf))


class TestDifferenceBonferroni:
    def test_symmetric_for_equal_observations(self):
        lo, hi = ci_diff_bonferroni(10.0, 10.0, POOLED, 0.05, BOUNDS)
        assert lo == pytest.approx(-hi, abs=1e-9)

    def test_degenerate_bounds_pin_difference_to_zero(self):
        lo, hi = ci_diff_bonferroni(7.3, 7.3, POOLED, 0.05, (7.3, 7.3))
        assert (lo, hi) == (0.0, 0.0)

    def test_contains_region_hull_on_table_row(self):
        region = ci_diff_region(10.21, 10.78, POOLED, 0.05, BOUNDS, 0.01)
        bon = ci_diff_bonferroni(10.21, 10.78, POOLED, 0.05, BOUNDS)
        assert bon[0] <= region.hull[0]
        assert bon[1] >= region.hull[1]


class TestDifferenceNaive:
    def test_table_values(self):
        # frozen from 40-digit arithmetic of y1-y2 +- z*sqrt(h(y1)+h(y2))
        lo, hi = ratio_scale(ci_diff_naive(10.21, 10.78, POOLED, 0.05))
        assert lo == pytest.approx(0.44276781053475137, rel=1e-9)
        assert hi == pytest.approx(0.72231768933257256, rel=1e-9)
        lo, hi = ratio_scale(ci_diff_naive(11.45, 13.36, POOLED, 0.05))
        assert lo == pytest.approx(0.13157476667107482, rel=1e-9)
        assert hi == pytest.approx(0.16665658202593787, rel=1e-9)

    def test_equal_pair_contains_unity_ratio(self):
        lo, hi = ratio_scale(ci_diff_naive(10.0, 10.0, POOLED, 0.05))
        assert lo < 1.0 < hi
        assert math.log(lo) == pytest.approx(-math.log(hi), abs=1e-12)


class TestBoundedHulls:
    def test_matches_scalar_construction(self):
        rng = np.random.default_rng(5)
        y = rng.uniform(7.5, 13.5, 100)
        lo, hi, empty = bounded_hulls(y, POOLED, 0.05, *BOUNDS)
        assert not np.any(empty)
        for i in range(0, 100, 9):
            cs = ci_mu_exact(float(y[i]), POOLED, 0.05, bounds=BOUNDS)
            assert cs.hull[0] == pytest.approx(lo[i], abs=1e-9)
            assert cs.hull[1] == pytest.approx(hi[i], abs=1e-9)

    def test_empty_detection(self):
        _, _, empty = bounded_hulls(np.array([25.0]), POOLED, 1e-6, 7.3, 8.0)
        assert empty[0]


class TestConfidenceSetType:
    def test_components_must_be_disjoint_sorted(self):
        with pytest.raises(ValueError):
            ConfidenceSet(components=((0.0, 2.0), (1.0, 3.0)), hull=(0.0, 3.0),
                          disconnected=True, level=0.95)

    def test_hull_and_flag(self):
        cs = ConfidenceSet.from_components([(3.0, 4.0), (0.0, 1.0)], 0.95)
        assert cs.components == ((0.0, 1.0), (3.0, 4.0))
        assert cs.hull == (0.0, 4.0)
        assert cs.disconnected
