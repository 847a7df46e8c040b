"""
Tests for nodal and level-set length estimators
"""

import logging
import math

import numpy as np
import pytest
from scipy import stats

from core.exceptions import DomainError, ResolutionError
from experiments.statistics import jackknife_se
from nodal_system.geometry import (
    CONTOUR,
    EPSILON_BAND,
    NodalEstimate,
    band_grid,
    nodal_length_contour,
    nodal_length_epsilon,
    required_resolution,
    segments_frame,
    trace_segments,
    yau_bounds_check,
)
from nodal_system.specfun import DegreeParams, spherical_grid
from tests.conftest import TEST_SEED, field_from_values, make_field

TWO_PI = 2 * math.pi
DEGREE_ONE = [0.3, 1.2, -0.8]


class TestDegreeOne:
    """A degree-one field is a linear form; its level sets are circles"""

    @pytest.mark.parametrize("replicate", range(10))
    def test_nodal_line_is_great_circle(self, replicate, fine_grid_l1):
        field = make_field(1, replicate=replicate, grid=fine_grid_l1)
        estimate = nodal_length_contour(field, extrapolate=True)
        assert estimate.length == pytest.approx(TWO_PI, rel=1e-3)
        assert estimate.method == CONTOUR

    def test_without_extrapolation(self, fine_grid_l1):
        field = field_from_values(1, DEGREE_ONE, fine_grid_l1)
        assert nodal_length_contour(field).length == pytest.approx(TWO_PI, rel=1e-3)

    def test_level_set_is_small_circle(self, fine_grid_l1):
        field = field_from_values(1, DEGREE_ONE, fine_grid_l1)
        amplitude = math.sqrt(sum(a * a for a in DEGREE_ONE))
        z = 0.5
        expected = TWO_PI * math.sqrt(1 - (z / amplitude) ** 2)
        estimate = nodal_length_contour(field, level=z, extrapolate=True)
        assert estimate.length == pytest.approx(expected, rel=1e-3)
        assert estimate.level == z

    def test_level_above_maximum_is_empty(self, fine_grid_l1):
        field = field_from_values(1, DEGREE_ONE, fine_grid_l1)
        assert nodal_length_contour(field, level=5.0).length == 0.0
        assert trace_segments(field, level=5.0).shape == (0, 4)

    def test_through_the_poles(self, fine_grid_l1):
        # the nodal circle passes within 1e-3 of both poles, inside the polar caps
        field = field_from_values(1, [0.0, 1e-3, 1.0], fine_grid_l1)
        assert nodal_length_contour(field, extrapolate=True).length == pytest.approx(TWO_PI, rel=1e-3)

    @pytest.mark.parametrize("replicate", range(3))
    def test_epsilon_band(self, replicate, fine_grid_l1):
        field = make_field(1, replicate=replicate, grid=fine_grid_l1)
        estimate = nodal_length_epsilon(field, epsilon=1e-3)
        assert estimate.length == pytest.approx(TWO_PI, rel=0.02)
        assert estimate.method == EPSILON_BAND
        assert estimate.epsilon == 1e-3


class TestContour:
    def test_constant_field_has_no_nodal_set(self):
        field = field_from_values(0, [1.3], spherical_grid(32, 64))
        assert nodal_length_contour(field).length == 0.0

    def test_segments_are_well_formed(self):
        field = make_field(12, replicate=4)
        segments = trace_segments(field)
        assert segments.ndim == 2 and segments.shape[1] == 4
        assert np.all((segments[:, [0, 2]] >= 0) & (segments[:, [0, 2]] <= math.pi))
        frame = segments_frame(segments)
        assert list(frame.columns) == ["theta1", "phi1", "theta2", "phi2"]
        assert len(frame) == len(segments)

    @pytest.mark.parametrize("replicate", range(3))
    def test_refinement_is_stable(self, replicate):
        enforced = nodal_length_contour(make_field(20, replicate=replicate, grid_mult=1.0)).length
        doubled = nodal_length_contour(make_field(20, replicate=replicate, grid_mult=2.0)).length
        assert enforced == pytest.approx(doubled, rel=5e-3)

    def test_extrapolation_moves_toward_fine_grid(self):
        coarse_field = make_field(20, replicate=2, grid_mult=1.0)
        fine = nodal_length_contour(make_field(20, replicate=2, grid_mult=6.0), extrapolate=True).length
        plain = nodal_length_contour(coarse_field).length
        extrapolated = nodal_length_contour(coarse_field, extrapolate=True).length
        assert abs(extrapolated - fine) <= abs(plain - fine) + 1e-3 * fine

    def test_deterministic(self):
        field = make_field(16, replicate=3)
        assert nodal_length_contour(field).length == nodal_length_contour(field).length

    def test_resolution_floor(self):
        field = make_field(10, grid=spherical_grid(40, 80))
        with pytest.raises(ResolutionError) as raised:
            nodal_length_contour(field)
        assert raised.value.required == (50, 100)
        estimate = nodal_length_contour(field, allow_under_resolved=True)
        assert estimate.length > 0
        assert estimate.resolution == (40, 80)

    def test_required_resolution(self):
        assert required_resolution(20) == (100, 200)


class TestEstimatorsAgree:
    @pytest.mark.parametrize("ell", [10, 20])
    @pytest.mark.parametrize("replicate", range(6))
    def test_contour_and_band_on_enforced_grid(self, ell, replicate):
        field = make_field(ell, replicate=replicate)
        assert field.grid.shape == required_resolution(ell)
        contour = nodal_length_contour(field).length
        band = nodal_length_epsilon(field, epsilon=0.05)
        assert band.length == pytest.approx(contour, rel=0.05)
        # the band is narrower than one cell of the enforced grid
        assert band.resolution[0] > field.grid.n_theta

    def test_band_sweep_approaches_contour(self):
        field = make_field(10, replicate=5)
        contour = nodal_length_contour(field).length
        for epsilon in (0.2, 0.1, 0.05, 0.025):
            assert nodal_length_epsilon(field, epsilon=epsilon).length == pytest.approx(contour, rel=0.1)

    def test_empty_band(self):
        field = field_from_values(0, [5.0], spherical_grid(16, 32))
        assert nodal_length_epsilon(field, epsilon=1.0).length == 0.0

    def test_band_rejects_nonpositive_epsilon(self):
        field = make_field(4)
        with pytest.raises(DomainError):
            nodal_length_epsilon(field, epsilon=0.0)

    def test_refined_band_independent_of_workers(self):
        field = make_field(12, replicate=1)
        single = nodal_length_epsilon(field, epsilon=0.05, workers=1)
        pooled = nodal_length_epsilon(field, epsilon=0.05, workers=3)
        assert single.length == pooled.length
        assert single.resolution == pooled.resolution


class TestBandGrid:
    def test_keeps_a_grid_that_resolves_the_band(self, fine_grid_l1):
        field = field_from_values(1, DEGREE_ONE, fine_grid_l1)
        assert band_grid(field, epsilon=0.5) is field.grid

    def test_refines_to_band_nodes_per_width(self):
        field = make_field(20, replicate=0)
        grid = band_grid(field, epsilon=0.05, band_nodes=2.0)
        rms = math.sqrt(field.grid.integrate(field.d1 ** 2 + field.d2 ** 2) / (4 * math.pi))
        assert math.pi / grid.n_theta <= 2 * 0.05 / (2.0 * rms)
        assert grid.n_phi == 2 * grid.n_theta
        assert grid.n_theta % 2 == 0

    def test_mean_square_gradient(self):
        # integral of |grad f|^2 is lambda times the integral of f^2
        field = make_field(20, replicate=0)
        mean_square = field.grid.integrate(field.d1 ** 2 + field.d2 ** 2) / (4 * math.pi)
        expected = 420 * np.sum(np.asarray(field.coeffs.a) ** 2) / 41
        assert mean_square == pytest.approx(expected, rel=1e-10)

    def test_cap(self, caplog):
        field = make_field(20, replicate=0)
        with caplog.at_level(logging.WARNING, logger="nodal_system.geometry"):
            grid = band_grid(field, epsilon=1e-4, max_theta_nodes=512)
        assert grid.shape == (512, 1024)
        assert "capped at 512" in caplog.text

    def test_constant_field_keeps_grid(self):
        field = field_from_values(0, [5.0], spherical_grid(16, 32))
        assert band_grid(field, epsilon=1e-3) is field.grid


class TestYauBounds:
    def _estimate(self, length, ell):
        return NodalEstimate(length=length, method=CONTOUR, resolution=(32, 64), ell=ell)

    def test_ratios(self):
        params = DegreeParams.from_ell(1)
        low, high = yau_bounds_check([self._estimate(TWO_PI, 1), self._estimate(4.0, 1)], params)
        assert low == pytest.approx(4.0 / math.sqrt(2))
        assert high == pytest.approx(TWO_PI / math.sqrt(2))

    def test_rejects_empty_and_mismatched(self):
        params = DegreeParams.from_ell(3)
        with pytest.raises(DomainError):
            yau_bounds_check([], params)
        with pytest.raises(DomainError):
            yau_bounds_check([self._estimate(1.0, 4)], params)

    def test_ratios_are_bounded_for_random_fields(self):
        params = DegreeParams.from_ell(16)
        estimates = [nodal_length_contour(make_field(16, replicate=r)) for r in range(5)]
        low, high = yau_bounds_check(estimates, params)
        # E[L] / sqrt(lam) = 2 pi / sqrt(2)
        assert 0.5 * TWO_PI / math.sqrt(2) < low <= high < 1.5 * TWO_PI / math.sqrt(2)


@pytest.mark.slow
class TestMeanNodalLength:
    def test_degree_twenty(self):
        ell, replicates = 20, 200
        lengths = np.array([
            nodal_length_contour(make_field(ell, replicate=r, grid_mult=2.0), extrapolate=True).length
            for r in range(replicates)
        ])
        expected = TWO_PI * math.sqrt(ell * (ell + 1) / 2)
        se = lengths.std(ddof=1) / math.sqrt(replicates)
        assert abs(lengths.mean() - expected) <= 2 * se


class TestLawOfLength:
    def test_resampled_coefficients_give_the_same_law(self):
        ell, replicates = 10, 100
        first = [nodal_length_contour(make_field(ell, replicate=r)).length for r in range(replicates)]
        second = [
            nodal_length_contour(make_field(ell, replicate=r, seed=TEST_SEED + 1)).length
            for r in range(replicates)
        ]
        assert stats.ks_2samp(first, second).pvalue > 0.01


@pytest.mark.slow
class TestVarianceGrowth:
    def test_successive_differences_bracket_log_two_over_32(self):
        replicates = 400
        variances, errors = [], []
        for ell in (16, 32, 64, 128):
            lengths = np.array([
                nodal_length_contour(make_field(ell, replicate=r), extrapolate=True).length
                for r in range(replicates)
            ])
            variances.append(lengths.var(ddof=1))
            errors.append(jackknife_se("variance", lengths))

        step = math.log(2) / 32
        for k in range(3):
            difference = variances[k + 1] - variances[k]
            combined = math.hypot(errors[k], errors[k + 1])
            assert abs(difference - step) <= 3 * combined
