"""
Tests for Legendre, Hermite, quadrature and quantile routines
"""

import math

import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import Legendre, leggauss
from scipy import special, stats

from core.exceptions import DomainError, ResolutionError, UnsupportedDegreeError
from nodal_system.specfun import (
    DegreeParams,
    _newton_gauss_legendre,
    gauss_legendre,
    gaussian_quantile,
    grid_for_degree,
    hermite,
    legendre_hilb,
    legendre_triple,
    normalized_legendre_table,
    planned_grid_size,
    require_exactness,
    spherical_grid,
)


class TestDegreeParams:
    def test_from_ell(self):
        params = DegreeParams.from_ell(10)
        assert params.lam == 110
        assert params.big_l == 10.5
        assert params.gradient_scale == pytest.approx(math.sqrt(55))

    def test_negative_degree_rejected(self):
        with pytest.raises(DomainError):
            DegreeParams.from_ell(-1)

    def test_non_integer_degree_rejected(self):
        with pytest.raises(DomainError):
            DegreeParams.from_ell(2.5)


class TestLegendreTriple:
    @pytest.mark.parametrize("ell", [0, 1, 5, 30])
    def test_values_match_scipy(self, ell):
        x = np.linspace(-1.0, 1.0, 101)
        triple = legendre_triple(DegreeParams.from_ell(ell), x)
        np.testing.assert_allclose(triple.p, special.eval_legendre(ell, x), rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("ell", [1, 2, 12])
    def test_derivatives_match_polynomial(self, ell):
        x = np.linspace(-0.999, 0.999, 57)
        triple = legendre_triple(DegreeParams.from_ell(ell), x)
        poly = Legendre.basis(ell)
        np.testing.assert_allclose(triple.dp, poly.deriv(1)(x), rtol=1e-11, atol=1e-10)
        np.testing.assert_allclose(triple.ddp, poly.deriv(2)(x), rtol=1e-11, atol=1e-9)

    def test_ode_residual(self):
        rng = np.random.default_rng(512)
        x = rng.uniform(-1.0, 1.0, 200)
        worst = 0.0
        for ell in range(513):
            params = DegreeParams.from_ell(ell)
            t = legendre_triple(params, x)
            residual = (1 - x ** 2) * t.ddp - 2 * x * t.dp + params.lam * t.p
            worst = max(worst, float(np.max(np.abs(residual) / (params.lam * np.abs(t.p) + 1))))
        assert worst <= 1e-8

    @pytest.mark.parametrize("ell", [3, 4])
    def test_endpoint_limits(self, ell):
        params = DegreeParams.from_ell(ell)
        lam = params.lam
        for sign in (1.0, -1.0):
            t = legendre_triple(params, sign)
            assert t.p == pytest.approx(sign ** ell)
            assert t.dp == pytest.approx(sign ** (ell + 1) * lam / 2)
            assert t.ddp == pytest.approx(sign ** ell * (lam - 2) * lam / 8)

    @pytest.mark.parametrize("ell", [7, 40, 200])
    def test_derivatives_continuous_at_endpoints(self, ell):
        params = DegreeParams.from_ell(ell)
        lam = params.lam
        for sign in (1.0, -1.0):
            t = legendre_triple(params, sign * (1.0 - 1e-13))
            assert t.dp == pytest.approx(sign ** (ell + 1) * lam / 2, rel=1e-7)
            assert t.ddp == pytest.approx(sign ** ell * (lam - 2) * lam / 8, rel=1e-7)

    def test_scalar_in_scalar_out(self):
        t = legendre_triple(DegreeParams.from_ell(3), 0.2)
        assert isinstance(t.p, float)

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            legendre_triple(DegreeParams.from_ell(3), 1.5)


class TestLegendreHilb:
    DEGREES = [50, 100, 200, 400]

    def _psi(self, ell):
        params = DegreeParams.from_ell(ell)
        return params, np.linspace(10.0, params.big_l * math.pi / 2, 3000)

    @pytest.mark.parametrize("ell", DEGREES)
    def test_value_within_envelope(self, ell):
        params, psi = self._psi(ell)
        theta = psi / params.big_l
        exact = legendre_triple(params, np.cos(theta))
        approx = legendre_hilb(params, psi)
        envelope = np.sqrt(2 / (math.pi * ell * np.sin(theta))) / psi
        assert np.max(np.abs(exact.p - approx.p) / envelope) <= 2.0

    @pytest.mark.parametrize("ell", DEGREES)
    def test_first_derivative_within_envelope(self, ell):
        params, psi = self._psi(ell)
        theta = psi / params.big_l
        exact = legendre_triple(params, np.cos(theta))
        approx = legendre_hilb(params, psi)
        envelope = np.sqrt(2 / (math.pi * ell * np.sin(theta) ** 3)) * ell / psi
        assert np.max(np.abs(exact.dp - approx.dp) / envelope) <= 4.0

    @pytest.mark.parametrize("ell", DEGREES)
    def test_second_derivative_within_envelope(self, ell):
        params, psi = self._psi(ell)
        theta = psi / params.big_l
        exact = legendre_triple(params, np.cos(theta))
        approx = legendre_hilb(params, psi)
        envelope = ell ** 2 * np.sqrt(2 / (math.pi * ell * np.sin(theta))) / (psi * np.sin(theta) ** 2)
        assert np.max(np.abs(exact.ddp - approx.ddp) / envelope) <= 10.0

    def test_requires_positive_psi(self):
        with pytest.raises(DomainError):
            legendre_hilb(DegreeParams.from_ell(10), 0.0)


class TestHermite:
    def test_matches_monomials(self):
        u = np.random.default_rng(4).uniform(-3.0, 3.0, 100)
        monomials = [
            np.ones_like(u),
            u,
            u ** 2 - 1,
            u ** 3 - 3 * u,
            u ** 4 - 6 * u ** 2 + 3,
        ]
        for n, expected in enumerate(monomials):
            np.testing.assert_allclose(hermite(n, u), expected, rtol=1e-12, atol=1e-12)

    def test_h4_closed_form(self):
        u = np.linspace(-3, 3, 13)
        np.testing.assert_allclose(hermite(4, u), u ** 4 - 6 * u ** 2 + 3, atol=1e-12)

    def test_orthogonality(self):
        x, w = hermegauss(30)
        w = w / math.sqrt(2 * math.pi)
        for m in range(6):
            for n in range(6):
                expected = math.factorial(n) if m == n else 0.0
                assert np.dot(w, hermite(m, x) * hermite(n, x)) == pytest.approx(expected, abs=1e-9)

    def test_order_cap(self):
        with pytest.raises(UnsupportedDegreeError):
            hermite(9, 0.5)


class TestGaussLegendre:
    def test_two_point_rule(self):
        x, w = gauss_legendre(2)
        np.testing.assert_allclose(x, [-1 / math.sqrt(3), 1 / math.sqrt(3)], rtol=1e-14)
        np.testing.assert_allclose(w, [1.0, 1.0], rtol=1e-14)

    def test_legendre_orthogonality(self):
        worst = 0.0
        for j in range(65):
            for k in range(j + 1):
                x, w = gauss_legendre(j + k + 1)
                value = np.dot(w, special.eval_legendre(j, x) * special.eval_legendre(k, x))
                expected = 2 / (2 * j + 1) if j == k else 0.0
                worst = max(worst, abs(value - expected))
        assert worst <= 1e-12

    def test_small_rule_exactness(self):
        x, w = gauss_legendre(5)
        assert np.dot(w, x ** 8) == pytest.approx(2 / 9, rel=1e-14)
        assert np.all(np.diff(x) > 0)

    def test_newton_rule_matches_library(self):
        x_ref, w_ref = leggauss(60)
        x, w = _newton_gauss_legendre(60)
        np.testing.assert_allclose(x, x_ref, atol=1e-13)
        np.testing.assert_allclose(w, w_ref, rtol=1e-11)

    def test_large_rule(self):
        x, w = gauss_legendre(400)
        assert w.sum() == pytest.approx(2.0, rel=1e-13)
        assert np.dot(w, x ** 200) == pytest.approx(2 / 201, rel=1e-10)

    def test_cached_rule_is_read_only(self):
        x, _ = gauss_legendre(7)
        with pytest.raises(ValueError):
            x[0] = 0.0

    def test_invalid_size(self):
        with pytest.raises(DomainError):
            gauss_legendre(0)


class TestGaussianQuantile:
    def test_matches_scipy(self):
        t = np.concatenate([np.logspace(-12, -1, 40), np.linspace(0.1, 0.9, 41), 1 - np.logspace(-1, -12, 40)])
        np.testing.assert_allclose(gaussian_quantile(t), stats.norm.ppf(t), rtol=1e-12, atol=1e-12)

    def test_median(self):
        assert gaussian_quantile(0.5) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("t", [0.0, 1.0, -0.1, float("nan")])
    def test_domain(self, t):
        with pytest.raises(DomainError):
            gaussian_quantile(t)


class TestNormalizedLegendreTable:
    def test_matches_scipy_normalization(self):
        ell = 6
        theta = np.linspace(0.1, 3.0, 25)
        values, _ = normalized_legendre_table(ell, theta)
        for m in range(ell + 1):
            norm = math.sqrt((2 * ell + 1) / (4 * math.pi) * math.factorial(ell - m) / math.factorial(ell + m))
            # scipy includes the Condon-Shortley phase
            expected = (-1) ** m * norm * special.lpmv(m, ell, np.cos(theta))
            np.testing.assert_allclose(values[m], expected, rtol=1e-10, atol=1e-13)

    def test_orthonormal(self):
        ell = 40
        x, w = gauss_legendre(2 * ell + 2)
        values, _ = normalized_legendre_table(ell, np.arccos(x), with_derivative=False)
        norms = 2 * math.pi * (values ** 2) @ w
        np.testing.assert_allclose(norms, 1.0, rtol=1e-11)

    def test_derivative_by_finite_difference(self):
        ell, h = 9, 1e-6
        theta = np.linspace(0.2, 2.9, 17)
        _, dtheta = normalized_legendre_table(ell, theta)
        plus, _ = normalized_legendre_table(ell, theta + h, with_derivative=False)
        minus, _ = normalized_legendre_table(ell, theta - h, with_derivative=False)
        np.testing.assert_allclose(dtheta, (plus - minus) / (2 * h), rtol=1e-6, atol=1e-7)

    def test_high_degree_is_finite(self):
        values, dtheta = normalized_legendre_table(1500, np.linspace(0.01, 3.13, 50))
        assert np.all(np.isfinite(values))
        assert np.all(np.isfinite(dtheta))

    def test_pole_values_allowed_without_derivative(self):
        values, _ = normalized_legendre_table(4, np.array([0.0, math.pi]), with_derivative=False)
        assert values[0, 0] == pytest.approx(math.sqrt(9 / (4 * math.pi)))
        np.testing.assert_allclose(values[1:], 0.0, atol=1e-12)


class TestGrids:
    def test_spherical_grid_integrates_low_degree_exactly(self):
        grid = spherical_grid(8, 16)
        assert grid.exact_degree == 15
        theta = grid.theta[:, None] * np.ones((1, grid.n_phi))
        assert grid.integrate(np.ones(grid.shape)) == pytest.approx(4 * math.pi, rel=1e-14)
        assert grid.integrate(np.cos(theta) ** 2) == pytest.approx(4 * math.pi / 3, rel=1e-13)

    def test_cell_weights(self):
        grid = spherical_grid(6, 12)
        assert grid.cell_weights.shape == grid.shape
        assert grid.cell_weights.sum() == pytest.approx(4 * math.pi, rel=1e-14)

    def test_colatitudes_increase(self):
        grid = spherical_grid(10, 20)
        assert np.all(np.diff(grid.theta) > 0)

    def test_default_policy(self):
        grid = grid_for_degree(20, theta_mult=5.0, phi_mult=10.0, grid_mult=1.0, min_theta_nodes=32)
        assert grid.shape == (100, 200)
        assert grid.exact_degree >= 80

    def test_planned_size_small_degree_uses_floor(self):
        assert planned_grid_size(0, 5.0, 10.0, 1.0, 32) == (32, 64)
        n_theta, n_phi = planned_grid_size(7, 5.0, 10.0, 1.3, 8)
        assert n_phi % 2 == 0
        assert n_theta >= 2 * 7 + 1

    def test_require_exactness_message(self):
        with pytest.raises(ResolutionError, match="requires n_theta >= 21, n_phi >= 41"):
            require_exactness(spherical_grid(10, 20), 40, "test functional")
