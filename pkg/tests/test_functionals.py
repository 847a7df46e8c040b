"""
Tests for the trispectrum, M and the chaos projections
"""

import math

import numpy as np
import pytest

from core.exceptions import DomainError, ResolutionError
from nodal_system.analytics import boundary_length_chaos, var_trispectrum_exact
from nodal_system.functionals import (
    FOURTH_CHAOS_WEIGHTS,
    measure,
    m_ell,
    proj2_level,
    proj4,
    sample_trispectrum,
)
from nodal_system.specfun import DegreeParams, spherical_grid
from tests.conftest import TEST_SEED, field_from_values, make_field

DEGREE_ONE = [0.3, 1.2, -0.8]
AMPLITUDE_SQ = sum(a * a for a in DEGREE_ONE)


def _sample_moments(values: np.ndarray):
    mean = values.mean()
    se = values.std(ddof=1) / math.sqrt(values.size)
    return mean, se


class TestTrispectrum:
    def test_degree_one_closed_form(self):
        # f = A cos(distance to an axis): int H4(f) = 4 pi (A^4/5 - 2 A^2 + 3)
        field = field_from_values(1, DEGREE_ONE, spherical_grid(8, 16))
        expected = 4 * math.pi * (AMPLITUDE_SQ ** 2 / 5 - 2 * AMPLITUDE_SQ + 3)
        assert sample_trispectrum(field) == pytest.approx(expected, rel=1e-12)

    def test_refinement_invariance(self):
        default = make_field(10, replicate=3)
        refined = make_field(10, replicate=3, grid=spherical_grid(100, 200))
        assert sample_trispectrum(default) == pytest.approx(sample_trispectrum(refined), rel=1e-9)
        assert proj4(default) == pytest.approx(proj4(refined), rel=1e-9)

    def test_refuses_inexact_grid(self):
        field = make_field(10, grid=spherical_grid(12, 50))
        with pytest.raises(ResolutionError):
            sample_trispectrum(field)
        with pytest.raises(ResolutionError):
            proj4(field)

    def test_centred(self):
        values = np.array([sample_trispectrum(make_field(10, replicate=r)) for r in range(200)])
        mean, se = _sample_moments(values)
        assert abs(mean) < 4 * se


class TestNormalizedTrispectrum:
    def test_scaling(self):
        params = DegreeParams.from_ell(10)
        assert m_ell(0.0, params) == 0.0
        assert m_ell(1.0, params) == pytest.approx(-math.sqrt(55) / 96, rel=1e-12)

    def test_measure_uses_definition(self):
        field = make_field(8, replicate=2)
        sample = measure(field, seed=TEST_SEED, replicate=2, nodal=False)
        assert sample.m == m_ell(sample.h4, field.params)
        assert sample.nodal_length is None
        assert math.isnan(sample.as_dict()["nodal_length"])


class TestFourthChaosProjection:
    def test_weights_exported(self):
        assert set(FOURTH_CHAOS_WEIGHTS) == {(4, 0, 0), (2, 2, 0), (0, 4, 0), (0, 2, 2), (2, 0, 2), (0, 0, 4)}

    def test_constant_field_rejected(self):
        field = field_from_values(0, [0.4], spherical_grid(4, 8))
        with pytest.raises(DomainError):
            proj4(field)

    def test_rotation_of_degree_one_field(self):
        # a degree-one field is determined up to rotation by its amplitude
        grid = spherical_grid(8, 16)
        first = proj4(field_from_values(1, DEGREE_ONE, grid))
        norm = math.sqrt(AMPLITUDE_SQ)
        second = proj4(field_from_values(1, [0.0, norm, 0.0], grid))
        assert first == pytest.approx(second, rel=1e-10)

    def test_centred(self):
        values = np.array([proj4(make_field(10, replicate=r)) for r in range(200)])
        mean, se = _sample_moments(values)
        assert abs(mean) < 4 * se


class TestLevelChaos:
    def test_zero_level(self):
        field = make_field(6)
        assert proj2_level(field, 0.0) == 0.0

    def test_degree_one_closed_form(self):
        field = field_from_values(1, DEGREE_ONE, spherical_grid(8, 16))
        coefficient = boundary_length_chaos(field.params, 1.0).proj2_coefficient
        expected = coefficient * 4 * math.pi * (AMPLITUDE_SQ / 3 - 1)
        assert proj2_level(field, 1.0) == pytest.approx(expected, rel=1e-12)

    def test_measure_at_level(self):
        field = make_field(8, replicate=1)
        sample = measure(field, seed=TEST_SEED, replicate=1, level=0.5, epsilon=0.05)
        assert sample.level == 0.5
        assert sample.level_length > 0
        assert sample.proj2 == pytest.approx(proj2_level(field, 0.5))
        assert sample.nodal_length_epsilon > 0
        assert sample.nodal_length > sample.level_length * 0.5


@pytest.mark.slow
class TestAcceptance:
    def test_trispectrum_variance(self):
        ell, replicates = 32, 2000
        params = DegreeParams.from_ell(ell)
        values = np.array([m_ell(sample_trispectrum(make_field(ell, replicate=r)), params) for r in range(replicates)])
        centred = values - values.mean()
        variance = np.mean(centred ** 2)
        se = math.sqrt((np.mean(centred ** 4) - variance ** 2) / replicates)
        assert abs(variance - var_trispectrum_exact(params)) < 5 * se

    def test_projection_tracks_trispectrum(self):
        ell = 64
        params = DegreeParams.from_ell(ell)
        pairs = []
        for r in range(300):
            field = make_field(ell, replicate=r)
            pairs.append((proj4(field), m_ell(sample_trispectrum(field), params)))
        pairs = np.array(pairs)
        assert np.corrcoef(pairs[:, 0], pairs[:, 1])[0, 1] >= 0.95

    def test_projection_variance(self):
        ell, replicates = 128, 300
        values = np.array([proj4(make_field(ell, replicate=r)) for r in range(replicates)])
        variance = values.var(ddof=1)
        expected = math.log(ell) / 32
        mc_error = 4 * variance * math.sqrt(2 / (replicates - 1))
        assert abs(variance - expected) <= 0.25 * expected + mc_error
