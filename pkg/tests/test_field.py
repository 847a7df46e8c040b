"""
Tests for coefficient sampling and field synthesis
"""

import math

import numpy as np
import pytest

from core.exceptions import DomainError, ResolutionError
from nodal_system.analytics import cross_covariance
from nodal_system.field import (
    HarmonicCoefficients,
    counter_normals,
    counter_uniforms,
    eval_point,
    eval_value,
    sample_coefficients,
    synthesize,
)
from nodal_system.specfun import DegreeParams, grid_for_degree, spherical_grid
from tests.conftest import TEST_SEED, make_field


class TestCounterStreams:
    def test_deterministic_and_open_interval(self):
        first = counter_uniforms(7, 3, 12, 1000)
        second = counter_uniforms(7, 3, 12, 1000)
        np.testing.assert_array_equal(first, second)
        assert np.all(first > 0.0) and np.all(first < 1.0)

    def test_streams_differ_by_key(self):
        base = counter_uniforms(7, 3, 12, 16)
        assert not np.array_equal(base, counter_uniforms(8, 3, 12, 16))
        assert not np.array_equal(base, counter_uniforms(7, 4, 12, 16))
        assert not np.array_equal(base, counter_uniforms(7, 3, 13, 16))

    def test_prefix_stable(self):
        np.testing.assert_array_equal(counter_uniforms(1, 0, 5, 10), counter_uniforms(1, 0, 5, 30)[:10])

    def test_normals_look_standard(self):
        z = counter_normals(99, 0, 0, 20000)
        assert abs(z.mean()) < 4 / math.sqrt(20000)
        assert z.std() == pytest.approx(1.0, abs=0.03)

    @pytest.mark.parametrize("replicate, tag", [(-1, 0), (1 << 48, 0), (0, 1 << 16)])
    def test_key_ranges(self, replicate, tag):
        with pytest.raises(DomainError):
            counter_uniforms(0, replicate, tag, 4)


class TestCoefficients:
    def test_reproducible(self):
        params = DegreeParams.from_ell(12)
        a = sample_coefficients(params, TEST_SEED, 5).a
        np.testing.assert_array_equal(a, sample_coefficients(params, TEST_SEED, 5).a)
        assert not np.array_equal(a, sample_coefficients(params, TEST_SEED, 6).a)
        assert a.shape == (25,)

    def test_wrong_length(self):
        with pytest.raises(DomainError):
            HarmonicCoefficients.from_values(2, [1.0, 2.0])

    def test_immutable(self):
        coeffs = HarmonicCoefficients.from_values(1, [0.0, 1.0, 0.0])
        with pytest.raises(ValueError):
            coeffs.a[0] = 2.0


class TestSynthesis:
    def test_degree_one_closed_form(self):
        a = [0.3, 1.2, -0.8]
        grid = spherical_grid(16, 32)
        field = synthesize(HarmonicCoefficients.from_values(1, a), grid, workers=1)
        theta, phi = np.meshgrid(grid.theta, grid.phi, indexing="ij")
        expected = a[1] * np.cos(theta) + a[2] * np.sin(theta) * np.cos(phi) + a[0] * np.sin(theta) * np.sin(phi)
        np.testing.assert_allclose(field.f, expected, atol=1e-13)
        expected_d1 = -a[1] * np.sin(theta) + np.cos(theta) * (a[2] * np.cos(phi) + a[0] * np.sin(phi))
        np.testing.assert_allclose(field.d1, expected_d1, atol=1e-13)
        np.testing.assert_allclose(field.d2, -a[2] * np.sin(phi) + a[0] * np.cos(phi), atol=1e-13)

    def test_parseval_and_gradient_energy(self):
        field = make_field(15, replicate=2)
        params = field.params
        energy = field.grid.integrate(field.f ** 2)
        assert energy == pytest.approx(4 * math.pi / (2 * params.ell + 1) * np.sum(field.coeffs.a ** 2), rel=1e-11)
        gradient_energy = field.grid.integrate(field.d1 ** 2 + field.d2 ** 2)
        assert gradient_energy == pytest.approx(params.lam * energy, rel=1e-10)

    def test_matches_pointwise_evaluation(self):
        field = make_field(9, replicate=1)
        theta = field.grid.theta[::7]
        phi = field.grid.phi[::11]
        t, p = np.meshgrid(theta, phi, indexing="ij")
        f, d1, d2 = eval_point(field.coeffs, t, p)
        scale = np.max(np.abs(field.f))
        np.testing.assert_allclose(f, field.f[::7, ::11], atol=1e-10 * scale)
        np.testing.assert_allclose(d1, field.d1[::7, ::11], atol=1e-10 * scale * 9)
        np.testing.assert_allclose(d2, field.d2[::7, ::11], atol=1e-10 * scale * 9)

    def test_independent_of_worker_count(self):
        params = DegreeParams.from_ell(30)
        coeffs = sample_coefficients(params, TEST_SEED, 0)
        grid = grid_for_degree(30)
        serial = synthesize(coeffs, grid, workers=1)
        threaded = synthesize(coeffs, grid, workers=4)
        np.testing.assert_array_equal(serial.f, threaded.f)
        np.testing.assert_array_equal(serial.d1, threaded.d1)
        np.testing.assert_array_equal(serial.d2, threaded.d2)

    def test_constant_field(self):
        field = synthesize(HarmonicCoefficients.from_values(0, [0.7]), spherical_grid(4, 8), workers=1)
        np.testing.assert_allclose(field.f, 0.7)
        np.testing.assert_allclose(field.d1, 0.0)
        np.testing.assert_allclose(field.d2, 0.0)

    def test_grid_too_coarse(self):
        coeffs = sample_coefficients(DegreeParams.from_ell(10), TEST_SEED, 0)
        with pytest.raises(ResolutionError):
            synthesize(coeffs, spherical_grid(4, 8))

    def test_frame_layout(self):
        field = make_field(3)
        frame = field.to_frame()
        assert list(frame.columns) == ["theta", "phi", "f", "d1", "d2"]
        assert len(frame) == field.grid.n_theta * field.grid.n_phi


class TestPointEvaluation:
    def test_poles(self):
        coeffs = sample_coefficients(DegreeParams.from_ell(7), TEST_SEED, 3)
        a0 = coeffs.a[7]
        assert eval_value(coeffs, 0.0, 1.3) == pytest.approx(a0, rel=1e-12, abs=1e-12)
        assert eval_value(coeffs, math.pi, 0.2) == pytest.approx(-a0, rel=1e-12, abs=1e-12)
        with pytest.raises(DomainError):
            eval_point(coeffs, 0.0, 0.0)

    def test_empirical_covariance(self):
        params = DegreeParams.from_ell(5)
        x, y = (0.7, 0.3), (1.4, 1.1)
        n = 4000
        samples = np.empty((n, 6))
        for replicate in range(n):
            coeffs = sample_coefficients(params, 4242, replicate)
            samples[replicate, :3] = eval_point(coeffs, *x)
            samples[replicate, 3:] = eval_point(coeffs, *y)

        expected = cross_covariance(params, x, y)
        products = samples[:, :3, None] * samples[:, None, 3:]
        empirical = products.mean(axis=0)
        se = products.std(axis=0, ddof=1) / math.sqrt(n)
        deviation = np.abs(empirical - expected) / (se + 1e-12)
        assert np.max(deviation) < 4.5
