"""
Nodal Geometry for NODAL LAB
Level-set length estimation from a synthesized field: marching squares on
the quadrature grid with the spherical metric, and the epsilon-band
Kac-Rice approximation
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.config_manager import settings
from core.exceptions import DomainError, ResolutionError
from nodal_system.field import FieldGrid, HarmonicCoefficients, eval_value, reduce_row_blocks
from nodal_system.specfun import DegreeParams, QuadratureGrid, spherical_grid

logger = logging.getLogger(__name__)

CONTOUR = "contour"
EPSILON_BAND = "epsilon_band"

# Edge order inside a cell: 0 bottom (v00-v01), 1 right (v01-v11),
# 2 top (v10-v11), 3 left (v00-v10)
EDGE_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
# Triangle edges: 0 pole-A, 1 pole-B, 2 A-B
TRIANGLE_PAIRS = ((0, 1), (0, 2), (1, 2))


@dataclass(frozen=True)
class NodalEstimate:
    """Length of a level set of one field on the unit sphere"""

    length: float
    method: str
    resolution: Tuple[int, int]
    ell: int
    level: float = 0.0
    epsilon: Optional[float] = None


def required_resolution(ell: int) -> Tuple[int, int]:
    """Ten points per wavelength in each direction"""
    return 5 * ell, 10 * ell


def check_resolution(field: FieldGrid, allow_under_resolved: bool = False) -> None:
    n_theta_min, n_phi_min = required_resolution(field.params.ell)
    n_theta, n_phi = field.grid.shape
    if allow_under_resolved:
        return
    if n_theta < n_theta_min or n_phi < n_phi_min:
        raise ResolutionError(
            f"nodal tracing at degree {field.params.ell}",
            required=(n_theta_min, n_phi_min),
            actual=(n_theta, n_phi),
        )


def _segment_lengths(segments: np.ndarray) -> np.ndarray:
    """ds^2 = dtheta^2 + sin^2(theta_mid) dphi^2, one value per segment"""
    if segments.size == 0:
        return np.zeros(0)
    theta1, phi1, theta2, phi2 = segments.T
    mid = 0.5 * (theta1 + theta2)
    return np.hypot(theta2 - theta1, np.sin(mid) * (phi2 - phi1))


def _stack(first, second, select: np.ndarray) -> np.ndarray:
    return np.column_stack([first[0][select], first[1][select], second[0][select], second[1][select]])


def _interior_segments(
    g: np.ndarray,
    theta: np.ndarray,
    phi: np.ndarray,
    dphi: float,
    coeffs: HarmonicCoefficients,
    level: float
) -> List[np.ndarray]:
    g_right = np.roll(g, -1, axis=1)
    g00, g01 = g[:-1], g_right[:-1]
    g10, g11 = g[1:], g_right[1:]
    positive = g > 0
    positive_right = np.roll(positive, -1, axis=1)
    s00, s01 = positive[:-1], positive_right[:-1]
    s10, s11 = positive[1:], positive_right[1:]

    crossings = (s00 != s01, s01 != s11, s10 != s11, s00 != s10)

    th0 = np.broadcast_to(theta[:-1, None], g00.shape)
    th1 = np.broadcast_to(theta[1:, None], g00.shape)
    ph0 = np.broadcast_to(phi[None, :], g00.shape)
    ph1 = ph0 + dphi

    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = g00 / (g00 - g01)
        t1 = g01 / (g01 - g11)
        t2 = g10 / (g10 - g11)
        t3 = g00 / (g00 - g10)
    points = (
        (th0, ph0 + t0 * dphi),
        (th0 + t1 * (th1 - th0), ph1),
        (th1, ph0 + t2 * dphi),
        (th0 + t3 * (th1 - th0), ph0),
    )

    count = sum(c.astype(np.int8) for c in crossings)
    two = count == 2
    segments = []
    for a, b in EDGE_PAIRS:
        select = two & crossings[a] & crossings[b]
        if np.any(select):
            segments.append(_stack(points[a], points[b], select))

    saddle = count == 4
    if np.any(saddle):
        centre_theta = 0.5 * (th0[saddle] + th1[saddle])
        centre_phi = ph0[saddle] + 0.5 * dphi
        centre_positive = (eval_value(coeffs, centre_theta, centre_phi) - level) > 0
        joins_diagonal = centre_positive == s00[saddle]
        saddle_points = [(p[0][saddle], p[1][saddle]) for p in points]
        # centre like v00: v01 and v10 are cut off, else v00 and v11
        for (a, b), chosen in (
            ((0, 1), joins_diagonal),
            ((2, 3), joins_diagonal),
            ((0, 3), ~joins_diagonal),
            ((1, 2), ~joins_diagonal),
        ):
            if np.any(chosen):
                segments.append(_stack(saddle_points[a], saddle_points[b], chosen))
        logger.debug(f"Resolved {int(saddle.sum())} saddle cells")
    return segments


def _cap_segments(
    g_row: np.ndarray,
    g_pole: float,
    theta_row: float,
    theta_pole: float,
    phi: np.ndarray,
    dphi: float
) -> List[np.ndarray]:
    g_a = g_row
    g_b = np.roll(g_row, -1)
    pole_positive = g_pole > 0
    s_a = g_a > 0
    s_b = np.roll(s_a, -1)
    crossings = (s_a != pole_positive, s_b != pole_positive, s_a != s_b)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_pa = g_pole / (g_pole - g_a)
        t_pb = g_pole / (g_pole - g_b)
        t_ab = g_a / (g_a - g_b)
    span = theta_row - theta_pole
    points = (
        (theta_pole + t_pa * span, phi),
        (theta_pole + t_pb * span, phi + dphi),
        (np.full_like(phi, theta_row), phi + t_ab * dphi),
    )

    segments = []
    for a, b in TRIANGLE_PAIRS:
        select = crossings[a] & crossings[b]
        if np.any(select):
            segments.append(_stack(points[a], points[b], select))
    return segments


def _trace(
    g: np.ndarray,
    theta: np.ndarray,
    phi: np.ndarray,
    coeffs: HarmonicCoefficients,
    level: float
) -> np.ndarray:
    dphi = 2.0 * math.pi / phi.size
    north = eval_value(coeffs, 0.0, 0.0) - level
    south = eval_value(coeffs, math.pi, 0.0) - level

    segments = _cap_segments(g[0], north, theta[0], 0.0, phi, dphi)
    if theta.size > 1:
        segments += _interior_segments(g, theta, phi, dphi, coeffs, level)
    segments += _cap_segments(g[-1], south, theta[-1], math.pi, phi, dphi)

    if not segments:
        return np.zeros((0, 4))
    return np.vstack(segments)


def trace_segments(
    field: FieldGrid,
    level: float = 0.0,
    allow_under_resolved: bool = False
) -> np.ndarray:
    """
    Linearly interpolated segments of the level set {f = level}

    Args:
        field: Synthesized field
        level: Threshold z
        allow_under_resolved: Skip the resolution floor

    Returns:
        Array of shape (K, 4) with rows (theta1, phi1, theta2, phi2);
        longitudes are unwrapped inside each cell
    """
    check_resolution(field, allow_under_resolved)
    return _trace(field.f - level, field.grid.theta, field.grid.phi, field.coeffs, level)


def segments_frame(segments: np.ndarray) -> pd.DataFrame:
    """Polyline table with columns theta1, phi1, theta2, phi2"""
    return pd.DataFrame(segments, columns=["theta1", "phi1", "theta2", "phi2"])


def nodal_length_contour(
    field: FieldGrid,
    level: float = 0.0,
    allow_under_resolved: bool = False,
    extrapolate: bool = False
) -> NodalEstimate:
    """
    Length of {f = level} by marching squares with the spherical metric

    Polar caps are triangulated against the pole value of f; saddle cells
    are resolved by the field value at the cell centre.

    Args:
        field: Synthesized field
        level: Threshold z (0 for the nodal line)
        allow_under_resolved: Skip the 5 ell x 10 ell resolution floor
        extrapolate: Richardson-correct with the same nodes subsampled by
            two in each direction (the chord bias is O(h^2))

    Returns:
        NodalEstimate with method "contour"
    """
    segments = trace_segments(field, level, allow_under_resolved)
    length = float(np.sum(_segment_lengths(segments)))

    if extrapolate and field.grid.n_phi % 2 == 0 and field.grid.n_theta >= 4:
        coarse = _trace(
            field.f[::2, ::2] - level,
            field.grid.theta[::2],
            field.grid.phi[::2],
            field.coeffs,
            level,
        )
        coarse_length = float(np.sum(_segment_lengths(coarse)))
        length = length + (length - coarse_length) / 3.0

    return NodalEstimate(
        length=max(length, 0.0),
        method=CONTOUR,
        resolution=field.grid.shape,
        ell=field.params.ell,
        level=float(level),
    )


def band_grid(
    field: FieldGrid,
    epsilon: float,
    band_nodes: Optional[float] = None,
    max_theta_nodes: Optional[int] = None
) -> QuadratureGrid:
    """
    Grid on which the epsilon band is resolved

    Across the level line the band {|f - z| <= eps} is about 2 eps / |grad f|
    wide. If the colatitude spacing pi / n_theta of the field grid exceeds
    2 eps / (band_nodes |grad f|_rms), a finer grid with twice as many
    longitudes as colatitudes is returned; otherwise the field grid itself.

    Args:
        field: Synthesized field
        epsilon: Band half-width, > 0
        band_nodes: Nodes across the band at the rms gradient (defaults to
            settings.band_nodes)
        max_theta_nodes: Cap on refined colatitudes (defaults to
            settings.max_band_theta_nodes)

    Returns:
        QuadratureGrid
    """
    band_nodes = settings.band_nodes if band_nodes is None else band_nodes
    max_theta_nodes = settings.max_band_theta_nodes if max_theta_nodes is None else max_theta_nodes
    grid = field.grid
    rms_gradient = math.sqrt(grid.integrate(field.d1 ** 2 + field.d2 ** 2) / (4.0 * math.pi))
    if rms_gradient == 0.0:
        return grid

    spacing = 2.0 * epsilon / (band_nodes * rms_gradient)
    n_theta = math.ceil(math.pi / spacing)
    if n_theta > max_theta_nodes:
        logger.warning(
            f"Epsilon band at degree {field.params.ell} needs {n_theta} colatitudes; "
            f"capped at {max_theta_nodes}"
        )
        n_theta = max_theta_nodes
    n_theta += n_theta % 2
    if n_theta <= grid.n_theta:
        return grid
    n_phi = max(2 * n_theta, grid.n_phi)
    return spherical_grid(n_theta, n_phi + n_phi % 2)


def _band_integrand(
    f: np.ndarray,
    d1: np.ndarray,
    d2: np.ndarray,
    level: float,
    epsilon: float
) -> np.ndarray:
    band = np.abs(f - level) <= epsilon
    return np.where(band, np.hypot(d1, d2), 0.0) / (2.0 * epsilon)


def nodal_length_epsilon(
    field: FieldGrid,
    epsilon: float,
    level: float = 0.0,
    workers: Optional[int] = None
) -> NodalEstimate:
    """
    Epsilon-band approximation: quadrature of |grad f| (1/2 eps) 1{|f - level| <= eps}

    The quadrature runs on band_grid(field, epsilon). When that is finer than
    the field grid, the field is re-synthesized block by block from its
    coefficients and only the band integral is kept.

    Args:
        field: Synthesized field
        epsilon: Band half-width, > 0
        level: Threshold z
        workers: Threads for the refined synthesis (defaults to settings.threads)

    Returns:
        NodalEstimate with method "epsilon_band" and the resolution actually used
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")

    grid = band_grid(field, epsilon)
    if grid is field.grid:
        length = grid.integrate(_band_integrand(field.f, field.d1, field.d2, level, epsilon))
    else:
        logger.debug(
            f"Epsilon band eps={epsilon} at degree {field.params.ell}: "
            f"refined {field.grid.n_theta}x{field.grid.n_phi} -> {grid.n_theta}x{grid.n_phi}"
        )

        def block_integral(rows: slice, f: np.ndarray, d1: np.ndarray, d2: np.ndarray) -> float:
            row_sums = _band_integrand(f, d1, d2, level, epsilon).sum(axis=1)
            return float(np.dot(grid.colat_weights[rows], row_sums)) * grid.phi_weight

        length = math.fsum(reduce_row_blocks(field.coeffs, grid, block_integral, workers=workers))

    return NodalEstimate(
        length=length,
        method=EPSILON_BAND,
        resolution=grid.shape,
        ell=field.params.ell,
        level=float(level),
        epsilon=float(epsilon),
    )


def yau_bounds_check(
    estimates: Sequence[NodalEstimate],
    params: DegreeParams
) -> Tuple[float, float]:
    """
    Smallest and largest length / sqrt(lambda) over the estimates

    Args:
        estimates: Nonempty estimates, all at degree params.ell
        params: Degree parameters (ell >= 1)

    Returns:
        (c_hat, C_hat)
    """
    if not estimates:
        raise DomainError("yau_bounds_check needs at least one estimate")
    if params.lam == 0:
        raise DomainError("yau_bounds_check needs ell >= 1")
    mismatched = [e.ell for e in estimates if e.ell != params.ell]
    if mismatched:
        raise DomainError(f"estimates at degrees {sorted(set(mismatched))} do not match ell={params.ell}")
    ratios = np.array([e.length for e in estimates]) / math.sqrt(params.lam)
    return float(ratios.min()), float(ratios.max())
