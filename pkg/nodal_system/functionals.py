"""
Spectral Functionals for NODAL LAB
Sample trispectrum, its normalized form M and the fourth-order chaos
projection of the nodal length, computed by exact grid quadrature
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np

from core.exceptions import DomainError
from nodal_system.analytics import boundary_length_chaos
from nodal_system.chaos import ChaosCoeffs
from nodal_system.field import FieldGrid
from nodal_system.geometry import nodal_length_contour, nodal_length_epsilon
from nodal_system.specfun import DegreeParams, hermite, require_exactness

logger = logging.getLogger(__name__)

FOURTH_CHAOS_WEIGHTS = ChaosCoeffs.up_to(4).fourth_chaos_weights()


@dataclass(frozen=True)
class FunctionalSample:
    """
    Every functional measured on one replicate

    Lengths that were not requested are None.
    """

    ell: int
    replicate: int
    seed: int
    h4: float
    m: float
    proj4: float
    nodal_length: Optional[float] = None
    nodal_length_epsilon: Optional[float] = None
    level: float = 0.0
    level_length: Optional[float] = None
    proj2: Optional[float] = None

    def as_dict(self) -> Dict[str, float]:
        return {key: (math.nan if value is None else value) for key, value in asdict(self).items()}


def sample_trispectrum(field: FieldGrid) -> float:
    """
    h4 = integral of H4(f) over the sphere

    H4(f) is band-limited to degree 4 ell, so the quadrature is exact once
    the grid is exact to that degree.
    """
    require_exactness(field.grid, 4 * field.params.ell, "sample trispectrum")
    return field.grid.integrate(hermite(4, field.f))


def m_ell(h4: float, params: DegreeParams) -> float:
    """M = -(1/4) sqrt(lam/2) (1/4!) h4"""
    return -0.25 * params.gradient_scale / 24.0 * h4


def proj4(field: FieldGrid) -> float:
    """
    Fourth-order chaos projection of the nodal length

    Args:
        field: Synthesized field of degree >= 1 on a grid exact to 4 ell

    Returns:
        sqrt(lam/2) times the quadrature of the six weighted Hermite products
        in f and the gradient components standardized by sqrt(lam/2)
    """
    params = field.params
    if params.ell < 1:
        raise DomainError("proj4 needs ell >= 1 (the gradient vanishes at ell = 0)")
    require_exactness(field.grid, 4 * params.ell, "fourth-chaos projection")

    scale = params.gradient_scale
    u1 = field.d1 / scale
    u2 = field.d2 / scale
    integrand = np.zeros_like(field.f)
    for (q_f, q_1, q_2), weight in FOURTH_CHAOS_WEIGHTS.items():
        integrand += weight * hermite(q_f, field.f) * hermite(q_1, u1) * hermite(q_2, u2)
    return scale * field.grid.integrate(integrand)


def proj2_level(field: FieldGrid, z: float) -> float:
    """Second-order chaos projection of the level-z boundary length"""
    require_exactness(field.grid, 2 * field.params.ell, "second-chaos projection")
    coefficient = boundary_length_chaos(field.params, z).proj2_coefficient
    if coefficient == 0.0:
        return 0.0
    return coefficient * field.grid.integrate(hermite(2, field.f))


def measure(
    field: FieldGrid,
    seed: int,
    replicate: int,
    level: float = 0.0,
    nodal: bool = True,
    epsilon: Optional[float] = None,
    extrapolate: bool = False,
    allow_under_resolved: bool = False
) -> FunctionalSample:
    """
    Measure all functionals of one replicate

    Args:
        field: Synthesized field
        seed: Master seed the field was drawn with
        replicate: Replicate index
        level: Threshold for the boundary length and proj2 (0 skips both)
        nodal: Trace the nodal line
        epsilon: Also compute the epsilon-band length when given
        extrapolate: Richardson-correct contour lengths
        allow_under_resolved: Skip the geometry resolution floor

    Returns:
        FunctionalSample
    """
    h4 = sample_trispectrum(field)
    sample = {
        "ell": field.params.ell,
        "replicate": int(replicate),
        "seed": int(seed),
        "h4": h4,
        "m": m_ell(h4, field.params),
        "proj4": proj4(field),
        "level": float(level),
    }

    if nodal:
        sample["nodal_length"] = nodal_length_contour(
            field,
            allow_under_resolved=allow_under_resolved,
            extrapolate=extrapolate,
        ).length
    if epsilon is not None:
        sample["nodal_length_epsilon"] = nodal_length_epsilon(field, epsilon, workers=1).length
    if level != 0.0:
        sample["proj2"] = proj2_level(field, level)
        if nodal:
            sample["level_length"] = nodal_length_contour(
                field,
                level=level,
                allow_under_resolved=allow_under_resolved,
                extrapolate=extrapolate,
            ).length

    return FunctionalSample(**sample)
