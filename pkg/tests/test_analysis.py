"""
byzsim.analysis — σ_K², efficiencies, the bivariate normal CDF and the
limiting covariance entries.
"""

import math

import numpy as np
import pytest


def _phi2_oracle(x, y, rho):
    """Φ₂ by one-dimensional quadrature of the conditional distribution."""
    from scipy import integrate, stats

    s = math.sqrt(1.0 - rho * rho)
    value, _ = integrate.quad(
        lambda t: stats.norm.pdf(t) * stats.norm.cdf((y - rho * t) / s), -np.inf, x,
        epsabs=1e-13, epsrel=1e-12,
    )
    return value


# ── σ_K² and efficiency ───────────────────────────────────────────────────

class TestSigmaK:
    def test_single_level_is_median_variance(self):
        from byzsim.analysis import sigma_K_squared
        assert sigma_K_squared(1) == pytest.approx(math.pi / 2.0, rel=1e-12)

    def test_large_k_approaches_limit(self):
        from byzsim.analysis import sigma_K_squared
        assert sigma_K_squared(2000) == pytest.approx(math.pi / 3.0, rel=1e-2)

    def test_scales_with_variance(self):
        from byzsim.analysis import sigma_K_squared
        assert sigma_K_squared(10, 4.0) == pytest.approx(4.0 * sigma_K_squared(10))

    def test_decreasing_in_k(self):
        from byzsim.analysis import sigma_K_squared
        values = [sigma_K_squared(k) for k in (1, 2, 5, 10, 50)]
        assert values == sorted(values, reverse=True)

    @pytest.mark.parametrize("K,sigma_sq", [(0, 1.0), (5, 0.0)])
    def test_invalid(self, K, sigma_sq):
        from byzsim.analysis import sigma_K_squared
        from byzsim.exceptions import ByzsimError
        with pytest.raises(ByzsimError):
            sigma_K_squared(K, sigma_sq)


class TestEfficiencyReport:
    def test_between_mom_and_limit(self):
        from byzsim.analysis import LIMIT_EFFICIENCY, MOM_EFFICIENCY, efficiency_report
        report = efficiency_report(10)
        assert MOM_EFFICIENCY < report.efficiency < LIMIT_EFFICIENCY
        assert report.efficiency == pytest.approx(1.0 / report.sigma_K_sq_over_sigma_sq)

    def test_five_levels_exceed_ninety_percent(self):
        from byzsim.analysis import efficiency_report
        assert efficiency_report(5).efficiency > 0.9

    def test_k_one_matches_mom(self):
        from byzsim.analysis import MOM_EFFICIENCY, efficiency_report
        assert efficiency_report(1).efficiency == pytest.approx(MOM_EFFICIENCY, rel=1e-12)


# ── Bivariate normal CDF ──────────────────────────────────────────────────

class TestBivariateNormalCdf:
    @pytest.mark.parametrize("x,y,rho", [
        (0.3, -0.7, 0.5), (-1.2, -0.4, -0.8), (2.0, 1.5, 0.95), (0.0, 1.0, 0.3),
        (-0.5, 0.0, -0.2), (1.1, -2.3, 0.0), (-3.0, 2.5, 0.7),
    ])
    def test_matches_quadrature(self, x, y, rho):
        from byzsim.analysis import bivariate_normal_cdf
        assert bivariate_normal_cdf(x, y, rho) == pytest.approx(_phi2_oracle(x, y, rho),
                                                                abs=1e-10)

    @pytest.mark.parametrize("rho", [-0.9, -0.3, 0.0, 0.4, 0.99])
    def test_origin_closed_form(self, rho):
        from byzsim.analysis import bivariate_normal_cdf
        expected = 0.25 + math.asin(rho) / (2.0 * math.pi)
        assert bivariate_normal_cdf(0.0, 0.0, rho) == pytest.approx(expected, abs=1e-14)

    def test_independent_factorises(self):
        from scipy.special import ndtr

        from byzsim.analysis import bivariate_normal_cdf
        assert bivariate_normal_cdf(0.4, -1.0, 0.0) == pytest.approx(ndtr(0.4) * ndtr(-1.0))

    def test_perfect_correlation(self):
        from scipy.special import ndtr

        from byzsim.analysis import bivariate_normal_cdf
        assert bivariate_normal_cdf(0.2, 0.9, 1.0) == pytest.approx(ndtr(0.2))
        assert bivariate_normal_cdf(0.2, 0.9, -1.0) == pytest.approx(ndtr(0.2) + ndtr(0.9) - 1)
        assert bivariate_normal_cdf(-1.0, -1.0, -1.0) == 0.0

    def test_infinite_arguments(self):
        from scipy.special import ndtr

        from byzsim.analysis import bivariate_normal_cdf
        assert bivariate_normal_cdf(np.inf, 0.5, 0.3) == pytest.approx(ndtr(0.5))
        assert bivariate_normal_cdf(-0.2, np.inf, 0.3) == pytest.approx(ndtr(-0.2))
        assert bivariate_normal_cdf(-np.inf, 0.5, 0.3) == 0.0
        assert bivariate_normal_cdf(np.inf, np.inf, 0.3) == 1.0

    def test_symmetric_in_arguments(self):
        from byzsim.analysis import bivariate_normal_cdf
        assert bivariate_normal_cdf(0.7, -0.1, 0.6) == pytest.approx(
            bivariate_normal_cdf(-0.1, 0.7, 0.6), abs=1e-15)

    def test_vectorised(self):
        from byzsim.analysis import bivariate_normal_cdf
        out = bivariate_normal_cdf(np.array([0.0, 1.0]), np.array([0.0, -1.0]), 0.5)
        assert out.shape == (2,)
        assert out[0] == pytest.approx(1.0 / 3.0)

    def test_invalid_correlation(self):
        from byzsim.analysis import bivariate_normal_cdf
        from byzsim.exceptions import DomainError
        with pytest.raises(DomainError):
            bivariate_normal_cdf(0.0, 0.0, 1.5)


# ── Covariance entries ────────────────────────────────────────────────────

class TestCovarianceEntries:
    def test_perfect_correlation_gives_sigma_k(self):
        from byzsim.analysis import CovEntryInputs, c_matrix_entry, sigma_K_squared
        assert c_matrix_entry(CovEntryInputs(rho=1.0, K=10)) == pytest.approx(
            sigma_K_squared(10), rel=1e-12)

    def test_independent_coordinates(self):
        from byzsim.analysis import CovEntryInputs, c_matrix_entry
        assert c_matrix_entry(CovEntryInputs(rho=0.0, K=10)) == pytest.approx(0.0, abs=1e-12)

    def test_single_level_matches_mom(self):
        from byzsim.analysis import CovEntryInputs, c_matrix_entry, c_mom_entry
        assert c_matrix_entry(CovEntryInputs(rho=0.6, K=1)) == pytest.approx(c_mom_entry(0.6))

    def test_mom_is_arcsine(self):
        from byzsim.analysis import c_mom_entry
        assert c_mom_entry(0.5) == pytest.approx(math.asin(0.5), abs=1e-13)
        assert c_mom_entry(0.5, (4.0, 1.0)) == pytest.approx(2.0 * math.asin(0.5), abs=1e-12)

    @pytest.mark.parametrize("rho", [-0.7, 0.0, 0.3, 1.0])
    def test_limit_closed_form(self, rho):
        from byzsim.analysis import c_limit_entry
        assert c_limit_entry(rho) == pytest.approx(2.0 * math.asin(rho / 2.0), abs=1e-7)

    def test_large_k_matches_limit(self):
        from byzsim.analysis import CovEntryInputs, c_limit_entry, c_matrix_entry
        entry = c_matrix_entry(CovEntryInputs(rho=0.3, K=200))
        assert entry == pytest.approx(c_limit_entry(0.3), abs=2e-2)

    @pytest.mark.parametrize("K", [2, 7, 25, 50])
    def test_diagonal_matches_sigma_k(self, K):
        from byzsim.analysis import CovEntryInputs, c_matrix_entry, sigma_K_squared
        assert c_matrix_entry(CovEntryInputs(rho=1.0, K=K)) == pytest.approx(
            sigma_K_squared(K), abs=1e-8)

    def test_monte_carlo(self):
        from byzsim.analysis import CovEntryInputs, c_matrix_entry
        from byzsim.aggregators import vrmom_constants

        rho, K = 0.4, 10
        deltas, psi_sum = vrmom_constants(K)
        gen = np.random.default_rng(12)
        z = gen.multivariate_normal([0.0, 0.0], [[1.0, rho], [rho, 1.0]], size=200_000)
        counts = (z[:, :, None] <= deltas).sum(axis=2)
        estimate = np.cov(counts[:, 0], counts[:, 1])[0, 1] / psi_sum**2
        assert c_matrix_entry(CovEntryInputs(rho=rho, K=K)) == pytest.approx(estimate, abs=0.015)

    def test_non_positive_variance(self):
        from byzsim.analysis import c_mom_entry
        from byzsim.exceptions import DomainError
        with pytest.raises(DomainError):
            c_mom_entry(0.5, (0.0, 1.0))


# ── Efficiency gap ────────────────────────────────────────────────────────

class TestGap:
    def test_endpoints(self):
        from byzsim.analysis import h_phi
        assert h_phi(0.0) == pytest.approx(0.0, abs=1e-9)
        assert h_phi(math.pi / 2.0) == pytest.approx(1.0 / 6.0, abs=1e-8)
        assert h_phi(-math.pi / 2.0) == pytest.approx(-1.0 / 6.0, abs=1e-8)

    def test_closed_form(self):
        from byzsim.analysis import h_phi
        phi = 0.7
        expected = (phi - 2.0 * math.asin(math.sin(phi) / 2.0)) / math.pi
        assert h_phi(phi) == pytest.approx(expected, abs=1e-8)

    def test_non_decreasing_on_grid(self):
        from byzsim.analysis import h_phi, phi_grid
        values = np.array([h_phi(phi) for phi in phi_grid(61)])
        assert np.all(np.diff(values) >= -1e-9)

    def test_gap_matrix_is_positive_semidefinite(self):
        from byzsim.analysis import gap_matrix
        for phi in (-1.2, 0.0, 0.5, math.pi / 2.0):
            gap = gap_matrix(phi)
            assert gap[0, 0] == pytest.approx(math.pi / 6.0, abs=1e-7)
            assert np.linalg.eigvalsh(gap).min() >= -1e-7

    def test_out_of_range_angle(self):
        from byzsim.analysis import h_phi
        from byzsim.exceptions import DomainError
        with pytest.raises(DomainError):
            h_phi(2.0)

    def test_grid(self):
        from byzsim.analysis import phi_grid
        from byzsim.exceptions import ConfigError
        grid = phi_grid(181)
        assert grid[0] == -math.pi / 2.0 and grid[-1] == math.pi / 2.0
        assert len(grid) == 181
        with pytest.raises(ConfigError):
            phi_grid(1)

    def test_bounded_by_one_sixth(self):
        from byzsim.analysis import h_phi, phi_grid
        values = np.array([h_phi(phi) for phi in phi_grid(181)])
        assert np.abs(values).max() <= 1.0 / 6.0 + 1e-3
