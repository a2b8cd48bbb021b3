"""Scalar Gaussian primitives: frozen values and structural properties."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from adfq.gaussians import (
    GaussianParams,
    log_sum_exp,
    max_gaussian_pdf,
    max_gaussian_pdf_grid,
    normal_cdf,
    normal_pdf,
    relu_cdf_approx,
)

# high-precision references computed with mpmath at 30 digits
PDF_AT_PEAK = 0.39894228040143267794
PDF_AT_MINUS_3 = 0.0044318484119380071756
CDF_AT_MINUS_3 = 0.0013498980316300945267
RELU_AT_MINUS_3 = 0.011108996538242306496


class TestNormalPdf:
    def test_standard_peak(self):
        assert normal_pdf(0.0, 0.0, 1.0) == pytest.approx(PDF_AT_PEAK, abs=1e-15)

    def test_peak_scales_with_stddev(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            m = rng.uniform(-20, 20)
            s = rng.uniform(0.05, 15)
            assert normal_pdf(m, m, s) == pytest.approx(PDF_AT_PEAK / s, rel=1e-14)

    def test_three_sigma_tail(self):
        assert normal_pdf(-3.0, 0.0, 1.0) == pytest.approx(PDF_AT_MINUS_3, rel=1e-14)

    def test_symmetry(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            x = rng.uniform(0, 10)
            assert normal_pdf(x) == pytest.approx(normal_pdf(-x), rel=1e-14)

    def test_integrates_to_one(self):
        total, _ = quad(lambda x: normal_pdf(x, 1.3, 2.7), -np.inf, np.inf)
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_rejects_bad_stddev(self):
        with pytest.raises(ValueError):
            normal_pdf(0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            normal_pdf(0.0, 0.0, -1.0)


class TestNormalCdf:
    def test_center(self):
        assert normal_cdf(0.0) == 0.5

    def test_saturates(self):
        assert normal_cdf(40.0) == 1.0

    def test_lower_tail_value(self):
        assert normal_cdf(-3.0) == pytest.approx(CDF_AT_MINUS_3, abs=1e-12)

    def test_complement_identity(self):
        for x in np.linspace(-8, 8, 321):
            assert abs(normal_cdf(x) + normal_cdf(-x) - 1.0) < 1e-14

    def test_monotone(self):
        xs = np.sort(np.random.default_rng(9).uniform(-30, 30, size=2000))
        vals = [normal_cdf(x) for x in xs]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_absolute_accuracy_against_erfc_series(self):
        # independent route: CDF as an integral of the density
        for x in (-6.0, -4.0, -1.5, 0.3, 2.2, 5.0):
            ref, _ = quad(normal_pdf, -12.0 + min(x, 0), x, epsabs=1e-14, limit=200)
            assert normal_cdf(x) == pytest.approx(ref, abs=1e-12)


class TestReluCdfApprox:
    def test_zero_and_positive_branch(self):
        assert relu_cdf_approx(0.0) == 1.0
        assert relu_cdf_approx(2.0) == 1.0
        assert relu_cdf_approx(1e-9) == 1.0

    def test_negative_branch_value(self):
        assert relu_cdf_approx(-3.0) == pytest.approx(RELU_AT_MINUS_3, rel=1e-14)

    def test_strictly_decreasing_below_zero(self):
        ys = np.linspace(-12, -1e-3, 500)
        vals = [relu_cdf_approx(y) for y in ys]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_tail_gap_to_cdf_vanishes(self):
        for y in np.arange(-10.0, -6.0 + 1e-9, 0.25):
            assert abs(normal_cdf(y) - relu_cdf_approx(y)) < 1e-6

    def test_gap_shrinks_toward_lower_tail(self):
        ys = np.arange(-1.0, -10.0 - 1e-9, -0.01)
        gaps = [abs(normal_cdf(y) - relu_cdf_approx(y)) for y in ys]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))


class TestMaxGaussianPdf:
    def test_single_component_reduces_to_pdf(self):
        assert max_gaussian_pdf(0.0, [GaussianParams(0.0, 1.0)]) == pytest.approx(
            PDF_AT_PEAK, rel=1e-14
        )
        assert max_gaussian_pdf(1.2, [GaussianParams(-0.4, 2.5)]) == pytest.approx(
            normal_pdf(1.2, -0.4, math.sqrt(2.5)), rel=1e-13
        )

    def test_two_identical_standard_normals_at_zero(self):
        # 2 * pdf(0) * cdf(0) collapses back to pdf(0)
        params = [GaussianParams(0.0, 1.0), GaussianParams(0.0, 1.0)]
        assert max_gaussian_pdf(0.0, params) == pytest.approx(PDF_AT_PEAK, rel=1e-13)

    def test_three_component_normalization(self):
        params = [
            GaussianParams(-1.0, 0.8),
            GaussianParams(0.5, 2.0),
            GaussianParams(2.0, 0.3),
        ]
        assert _trapezoid_mass(params) == pytest.approx(1.0, abs=1e-6)

    def test_randomized_normalization(self):
        rng = np.random.default_rng(1234)
        for _ in range(25):
            n = int(rng.integers(1, 11))
            params = [
                GaussianParams(rng.uniform(-10, 10), rng.uniform(0.1, 5.0) ** 2)
                for _ in range(n)
            ]
            assert _trapezoid_mass(params) == pytest.approx(1.0, abs=1e-6)

    def test_nonnegative_and_no_underflow_blowup(self):
        params = [GaussianParams(0.0, 1.0), GaussianParams(500.0, 1.0)]
        # far below the second component, its CDF factor underflows linearly
        val = max_gaussian_pdf(-5.0, params)
        assert val >= 0.0
        assert np.isfinite(val)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            max_gaussian_pdf(0.0, [])


def _trapezoid_mass(params):
    mu = np.array([p.mean for p in params])
    smax = max(math.sqrt(p.variance) for p in params)
    grid = np.linspace(mu.min() - 10 * smax, mu.max() + 10 * smax, 40001)
    return float(np.trapezoid(max_gaussian_pdf_grid(grid, params), grid))


class TestLogSumExp:
    def test_singleton(self):
        assert log_sum_exp([0.0]) == 0.0
        assert log_sum_exp([-3.7]) == pytest.approx(-3.7, abs=1e-15)

    def test_identical_pair(self):
        a = 2.31
        assert log_sum_exp([a, a]) == pytest.approx(a + math.log(2.0), rel=1e-15)

    def test_deep_negative_pair(self):
        # shift invariance lets the naive small-magnitude formula act as oracle
        expected = -1000.0 + math.log(1.0 + math.exp(-1.0))
        assert log_sum_exp([-1000.0, -1001.0]) == pytest.approx(expected, abs=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            vals = rng.uniform(-1e3, 1e3, size=rng.integers(1, 8)).tolist()
            c = float(rng.uniform(-1e3, 1e3))
            base = log_sum_exp(vals)
            shifted = log_sum_exp([v + c for v in vals])
            assert abs(shifted - (base + c)) < 1e-12 * max(1.0, abs(base + c))

    def test_survives_extreme_magnitudes(self):
        assert log_sum_exp([-1e8, -1e8 - 5.0]) == pytest.approx(
            -1e8 + math.log(1 + math.exp(-5.0)), abs=1e-6
        )
        assert log_sum_exp([-math.inf, -math.inf]) == -math.inf

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            log_sum_exp([])
