"""Least-squares polynomial reduction of log-densities."""
import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koprop import (
    BoxDomain,
    GaussianPdf,
    RankDeficiencyError,
    ReductionConfig,
    build_design_matrix,
    credible_region,
    enumerate_indices,
    fit_coefficients,
    log_gaussian,
    propagate_logpdf_inverse,
    reduce_logpdf,
)

UNIT_BOX = BoxDomain([-1.0, -1.0], [1.0, 1.0])


class TestDesignMatrix:
    def test_univariate_order_one(self):
        matrix = build_design_matrix(np.array([[0.0], [1.0]]), 1)
        npt.assert_array_equal(matrix, [[1.0, 0.0], [1.0, 1.0]])

    def test_bivariate_row(self):
        matrix = build_design_matrix(np.array([[2.0, 3.0]]), 2)
        npt.assert_array_equal(matrix, [[1.0, 2.0, 3.0, 4.0, 6.0, 9.0]])

    def test_shape_order_four(self):
        samples = np.random.default_rng(0).uniform(-1, 1, size=(100, 2))
        assert build_design_matrix(samples, 4).shape == (100, 15)

    @given(order=st.integers(1, 4))
    @settings(max_examples=10, deadline=None)
    def test_columns_follow_graded_order(self, order):
        pts = np.random.default_rng(1).uniform(-2, 2, size=(5, 2))
        matrix = build_design_matrix(pts, order)
        exponents = enumerate_indices(2, order)
        direct = np.prod(pts[:, None, :] ** exponents[None, :, :], axis=2)
        npt.assert_allclose(matrix, direct, rtol=1e-14)


class TestFitCoefficients:
    def test_exact_recovery_of_polynomial(self):
        rng = np.random.default_rng(2)
        samples = rng.uniform(-1, 1, size=(200, 2))
        matrix = build_design_matrix(samples, 3)
        truth = rng.standard_normal(matrix.shape[1])
        fitted = fit_coefficients(matrix, matrix @ truth)
        npt.assert_allclose(fitted, truth, atol=1e-10)

    def test_zero_values_give_zero_coefficients(self):
        samples = np.random.default_rng(3).uniform(-1, 1, size=(50, 2))
        matrix = build_design_matrix(samples, 2)
        npt.assert_allclose(fit_coefficients(matrix, np.zeros(50)), 0.0, atol=1e-14)

    def test_rank_deficiency_raises(self):
        samples = np.zeros((30, 2))  # every sample identical
        matrix = build_design_matrix(samples, 2)
        with pytest.raises(RankDeficiencyError, match="more\\s+samples|lower the target"):
            fit_coefficients(matrix, np.ones(30))

    def test_normal_equation_equivalence(self):
        rng = np.random.default_rng(4)
        samples = rng.uniform(-1, 1, size=(300, 2))
        matrix = build_design_matrix(samples, 3)
        values = rng.standard_normal(300)
        via_lstsq = fit_coefficients(matrix, values)
        normal = np.linalg.solve(matrix.T @ matrix, matrix.T @ values)
        npt.assert_allclose(via_lstsq, normal, atol=1e-8)


class TestReductionConfig:
    def test_order_below_twice_map_order(self):
        with pytest.raises(ValueError, match="twice the map"):
            ReductionConfig(order=4, sample_count=100, region=UNIT_BOX, seed=0, map_order=2)

    def test_sample_count_covers_monomials(self):
        with pytest.raises(ValueError, match="monomials"):
            ReductionConfig(order=4, sample_count=10, region=UNIT_BOX, seed=0)


class TestReduceLogpdf:
    def test_quadratic_recovery(self, prior):
        zeta = log_gaussian(prior)
        config = ReductionConfig(order=2, sample_count=50, region=zeta.region, seed=5)
        reduced = reduce_logpdf(zeta, config)
        npt.assert_allclose(reduced.coefficients, zeta.coefficients, atol=1e-8)

    def test_idempotence(self, prior):
        zeta = log_gaussian(prior)
        config = ReductionConfig(order=4, sample_count=400, region=UNIT_BOX, seed=6)
        once = reduce_logpdf(zeta, config)
        twice = reduce_logpdf(once, config)
        npt.assert_allclose(twice.coefficients, once.coefficients, atol=1e-10)

    def test_seeded_determinism(self, prior):
        zeta = log_gaussian(prior)
        config = ReductionConfig(order=3, sample_count=200, region=UNIT_BOX, seed=7)
        a = reduce_logpdf(zeta, config)
        b = reduce_logpdf(zeta, config)
        npt.assert_array_equal(a.coefficients, b.coefficients)

    def test_level_window_rejection_deterministic(self, prior):
        zeta = log_gaussian(prior)
        config = ReductionConfig(
            order=2, sample_count=200, region=zeta.region, seed=8, level_window=10.0
        )
        a = reduce_logpdf(zeta, config)
        b = reduce_logpdf(zeta, config)
        npt.assert_array_equal(a.coefficients, b.coefficients)
        npt.assert_allclose(a.coefficients, zeta.coefficients, atol=1e-8)

    def test_diagnostics_reported(self, prior):
        zeta = log_gaussian(prior)
        config = ReductionConfig(order=2, sample_count=100, region=zeta.region, seed=9)
        reduced = reduce_logpdf(zeta, config)
        diag = reduced.diagnostics
        assert diag["sample_count"] == 100
        assert diag["holdout_count"] == 20
        assert diag["rms_holdout"] < 1e-9
        assert reduced.region is zeta.region

    def test_affine_rescaling_exactness(self):
        # fit in scaled coordinates, return coefficients in state units
        region = BoxDomain([10.0, -3.0], [14.0, 5.0])
        exponents = enumerate_indices(2, 3)
        rng = np.random.default_rng(10)
        coeffs = rng.standard_normal(exponents.shape[0])
        from koprop import PolyLogPdf

        truth = PolyLogPdf(indices=exponents, coefficients=coeffs, region=region)
        config = ReductionConfig(order=3, sample_count=300, region=region, seed=11)
        fitted = reduce_logpdf(truth, config)
        pts = region.sample(rng, 50)
        npt.assert_allclose(fitted(pts), truth(pts), rtol=1e-9, atol=1e-9)

    def test_duffing_composite_residual(self, galerkin9, prior, duffing_box):
        # 250 s pull-back of the quadratic log-density through the order-9
        # map, fitted at order 4 over the credible region: the held-out
        # relative RMS lands near 1.7% of the value range (frozen bound 3%)
        zeta = log_gaussian(prior)
        composite = lambda pts: propagate_logpdf_inverse(galerkin9, zeta, 250.0, pts)
        region = credible_region(composite, duffing_box)
        config = ReductionConfig(
            order=4,
            sample_count=5000,
            region=region,
            seed=99,
            level_window=15.0,
            map_order=9,
        )
        reduced = reduce_logpdf(composite, config)
        assert reduced.diagnostics["rms_holdout_relative"] < 0.03

    def test_monotone_fidelity_in_order(self, galerkin9, prior, duffing_box):
        zeta = log_gaussian(prior)
        composite = lambda pts: propagate_logpdf_inverse(galerkin9, zeta, 250.0, pts)
        region = credible_region(composite, duffing_box)
        errors = []
        for order in (2, 3, 4, 5, 6):
            config = ReductionConfig(
                order=order,
                sample_count=5000,
                region=region,
                seed=99,
                level_window=15.0,
                map_order=9,
            )
            errors.append(reduce_logpdf(composite, config).diagnostics["rms_holdout"])
        for a, b in zip(errors, errors[1:]):
            assert b <= 1.1 * a


class TestCredibleRegion:
    def test_gaussian_region_size(self, prior):
        zeta = log_gaussian(prior)
        search = BoxDomain([-3.0, -3.0], [3.0, 3.0])
        region = credible_region(zeta, search, level_offset=12.5, grid_points=201)
        # 12.5 log-units below the peak is the 5-sigma ellipse
        halfwidth = region.halfwidth
        assert (halfwidth > 0.45).all() and (halfwidth < 0.60).all()
        npt.assert_allclose(region.center, prior.mean, atol=0.05)

    def test_clipped_to_search_box(self, prior):
        zeta = log_gaussian(prior)
        search = BoxDomain([0.0, 0.0], [0.5, 0.5])
        region = credible_region(zeta, search)
        assert (region.lower >= search.lower).all()
        assert (region.upper <= search.upper).all()
