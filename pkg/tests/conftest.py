"""
Shared fixtures for the NODAL LAB test suite
"""

import pytest

from nodal_system.field import FieldGrid, HarmonicCoefficients, sample_coefficients, synthesize
from nodal_system.specfun import DegreeParams, QuadratureGrid, grid_for_degree, spherical_grid

TEST_SEED = 20240601


def make_field(
    ell: int,
    replicate: int = 0,
    seed: int = TEST_SEED,
    grid: QuadratureGrid = None,
    grid_mult: float = 1.0
) -> FieldGrid:
    """Synthesize one replicate on the default (or a given) grid"""
    params = DegreeParams.from_ell(ell)
    coeffs = sample_coefficients(params, seed, replicate)
    if grid is None:
        grid = grid_for_degree(ell, grid_mult=grid_mult)
    return synthesize(coeffs, grid, workers=1)


def field_from_values(ell: int, values, grid: QuadratureGrid) -> FieldGrid:
    return synthesize(HarmonicCoefficients.from_values(ell, values), grid, workers=1)


@pytest.fixture
def params10() -> DegreeParams:
    return DegreeParams.from_ell(10)


@pytest.fixture
def fine_grid_l1() -> QuadratureGrid:
    """Grid well above the floors for degree-1 geometry checks"""
    return spherical_grid(64, 256)
