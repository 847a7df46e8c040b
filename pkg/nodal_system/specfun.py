"""
Special Functions for NODAL LAB
Legendre polynomials and their Hilb approximants, fully normalized
associated Legendre tables, probabilists' Hermite polynomials,
Gauss-Legendre rules and the Gaussian quantile
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

from core.cache_manager import cache_manager
from core.config_manager import settings
from core.exceptions import DomainError, ResolutionError, UnsupportedDegreeError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# numpy's companion-matrix rule is documented as reliable up to this size
LEGGAUSS_MAX_NODES = 100
MAX_HERMITE_ORDER = 8


@dataclass(frozen=True)
class DegreeParams:
    """
    Degree ell with its eigenvalue lam = ell(ell+1) and shifted degree L = ell + 1/2
    """

    ell: int
    lam: int
    big_l: float

    def __post_init__(self):
        if self.ell < 0:
            raise DomainError(f"degree must be nonnegative, got {self.ell}")
        if self.lam != self.ell * (self.ell + 1) or self.big_l != self.ell + 0.5:
            raise DomainError(f"inconsistent degree parameters for ell={self.ell}")

    @classmethod
    def from_ell(cls, ell: int) -> "DegreeParams":
        if isinstance(ell, bool) or int(ell) != ell:
            raise DomainError(f"degree must be an integer, got {ell!r}")
        ell = int(ell)
        return cls(ell=ell, lam=ell * (ell + 1), big_l=ell + 0.5)

    @property
    def gradient_scale(self) -> float:
        """Standard deviation of each gradient component, sqrt(lam/2)"""
        return math.sqrt(self.lam / 2.0)


@dataclass(frozen=True)
class LegendreTriple:
    """P_ell(x), P'_ell(x), P''_ell(x)"""

    p: ArrayLike
    dp: ArrayLike
    ddp: ArrayLike


@dataclass(frozen=True)
class QuadratureGrid:
    """
    Gauss-Legendre colatitudes crossed with equispaced longitudes

    colat_nodes are the cosines of the colatitudes, ordered by increasing
    colatitude. A grid with n colatitudes and n_phi longitudes integrates
    every spherical harmonic of degree <= exact_degree exactly.
    """

    colat_nodes: np.ndarray
    colat_weights: np.ndarray
    n_phi: int
    exact_degree: int

    @property
    def n_theta(self) -> int:
        return int(self.colat_nodes.shape[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_theta, self.n_phi)

    @property
    def theta(self) -> np.ndarray:
        return np.arccos(self.colat_nodes)

    @property
    def phi(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi

    @property
    def phi_weight(self) -> float:
        return 2.0 * np.pi / self.n_phi

    @property
    def cell_weights(self) -> np.ndarray:
        """(n_theta, n_phi) quadrature weights; they sum to 4 pi"""
        return np.outer(self.colat_weights, np.full(self.n_phi, self.phi_weight))

    def integrate(self, values: np.ndarray) -> float:
        """Quadrature of grid values of shape (n_theta, n_phi) over the sphere"""
        return float(np.sum(self.cell_weights * values))

    def describe(self) -> Dict[str, int]:
        return {
            "n_theta": self.n_theta,
            "n_phi": self.n_phi,
            "exact_degree": self.exact_degree,
        }


def _as_output(value: np.ndarray, scalar: bool) -> ArrayLike:
    return float(value) if scalar else value


def legendre_triple(params: DegreeParams, x: ArrayLike) -> LegendreTriple:
    """
    Legendre polynomial of degree ell with first and second derivatives

    Upward three-term recurrence for P, and the derivative recurrences
    P'_n = P'_{n-2} + (2n-1) P_{n-1}, P''_n = P''_{n-2} + (2n-1) P'_{n-1},
    which involve no division and stay accurate at the endpoints.

    Args:
        params: Degree parameters
        x: Point(s) in [-1, 1]

    Returns:
        LegendreTriple with arrays shaped like x (floats for scalar x)
    """
    scalar = np.ndim(x) == 0
    x_arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x_arr)) or np.any(np.abs(x_arr) > 1.0):
        raise DomainError("legendre_triple requires |x| <= 1")

    ell = params.ell
    p_prev = np.ones_like(x_arr)
    dp_prev = np.zeros_like(x_arr)
    ddp_prev = np.zeros_like(x_arr)
    if ell == 0:
        p, dp, ddp = p_prev, dp_prev, ddp_prev
    else:
        p = x_arr.copy()
        dp = np.ones_like(x_arr)
        ddp = np.zeros_like(x_arr)
        for n in range(2, ell + 1):
            p_next = ((2 * n - 1) * x_arr * p - (n - 1) * p_prev) / n
            dp_next = dp_prev + (2 * n - 1) * p
            ddp_next = ddp_prev + (2 * n - 1) * dp
            p_prev, p = p, p_next
            dp_prev, dp = dp, dp_next
            ddp_prev, ddp = ddp, ddp_next

    # Endpoint limits
    lam = float(params.lam)
    for sign in (1.0, -1.0):
        at_end = x_arr == sign
        if np.any(at_end):
            p = np.where(at_end, sign ** ell, p)
            dp = np.where(at_end, sign ** (ell + 1) * lam / 2.0, dp)
            ddp = np.where(at_end, sign ** ell * (lam - 2.0) * lam / 8.0, ddp)

    return LegendreTriple(
        p=_as_output(p, scalar),
        dp=_as_output(dp, scalar),
        ddp=_as_output(ddp, scalar),
    )


def legendre_hilb(params: DegreeParams, psi: ArrayLike) -> LegendreTriple:
    """
    Leading Hilb-type approximants of P_ell, P'_ell, P''_ell at cos(psi/L)

    Args:
        params: Degree parameters (ell >= 1)
        psi: Scaled angle(s) psi = L*theta, psi > 0

    Returns:
        LegendreTriple of approximants (no remainder terms)
    """
    scalar = np.ndim(psi) == 0
    psi_arr = np.asarray(psi, dtype=float)
    if np.any(psi_arr <= 0):
        raise DomainError("legendre_hilb requires psi > 0")
    if params.ell < 1:
        raise DomainError("legendre_hilb requires ell >= 1")

    ell = float(params.ell)
    sin_t = np.sin(psi_arr / params.big_l)
    p = np.sqrt(2.0 / (np.pi * ell * sin_t)) * np.sin(psi_arr + np.pi / 4)
    dp = np.sqrt(2.0 / (np.pi * ell * sin_t ** 3)) * ell * np.sin(psi_arr - np.pi / 4)
    ddp = (-ell ** 2 * p + 2.0 * dp) / sin_t ** 2

    return LegendreTriple(
        p=_as_output(p, scalar),
        dp=_as_output(dp, scalar),
        ddp=_as_output(ddp, scalar),
    )


def hermite(n: int, u: ArrayLike) -> ArrayLike:
    """
    Probabilists' Hermite polynomial H_n(u), H_{n+1} = u H_n - n H_{n-1}

    Args:
        n: Order, 0..8
        u: Argument(s)

    Returns:
        H_n(u)
    """
    if int(n) != n or n < 0:
        raise DomainError(f"Hermite order must be a nonnegative integer, got {n!r}")
    if n > MAX_HERMITE_ORDER:
        raise UnsupportedDegreeError(f"Hermite order {n} exceeds {MAX_HERMITE_ORDER}")

    scalar = np.ndim(u) == 0
    u_arr = np.asarray(u, dtype=float)
    h_prev = np.ones_like(u_arr)
    if n == 0:
        return _as_output(h_prev, scalar)
    h = u_arr.copy()
    for k in range(1, int(n)):
        h_prev, h = h, u_arr * h - k * h_prev
    return _as_output(h, scalar)


def _legendre_pair(n: int, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    return p, p_prev


def _newton_gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    # Tricomi-type initial guesses, then Newton on the three-term recurrence
    k = np.arange(1, n + 1, dtype=float)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(50):
        p, p_prev = _legendre_pair(n, x)
        dp = n * (x * p - p_prev) / (x * x - 1.0)
        step = p / dp
        x = x - step
        if np.max(np.abs(step)) < 1e-15:
            break
    p, p_prev = _legendre_pair(n, x)
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    weights = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return x[order], weights[order]


def gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre nodes and weights on [-1, 1], exact to degree 2n-1

    Args:
        n: Number of nodes (>= 1)

    Returns:
        (nodes ascending, weights), both read-only
    """
    if int(n) != n or n < 1:
        raise DomainError(f"gauss_legendre requires n >= 1, got {n!r}")
    n = int(n)

    def build():
        if n <= LEGGAUSS_MAX_NODES:
            nodes, weights = leggauss(n)
        else:
            nodes, weights = _newton_gauss_legendre(n)
        logger.debug(f"Built {n}-node Gauss-Legendre rule")
        return (np.ascontiguousarray(nodes), np.ascontiguousarray(weights))

    return cache_manager.get_or_compute("gauss_legendre", {"n": n}, build)


def gaussian_quantile(t: ArrayLike) -> ArrayLike:
    """
    Standard normal quantile with one Newton step against the CDF

    The rational approximation is scipy's ndtri; the refinement runs on the
    smaller tail probability so the correction keeps relative accuracy.

    Args:
        t: Probability (or array) in the open interval (0, 1)

    Returns:
        Phi^{-1}(t)
    """
    scalar = np.ndim(t) == 0
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0.0)) or np.any(~(t_arr < 1.0)):
        raise DomainError("gaussian_quantile requires 0 < t < 1")

    upper = t_arr > 0.5
    tail = np.where(upper, 1.0 - t_arr, t_arr)
    z = special.ndtri(tail)
    density = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    z = z - (special.ndtr(z) - tail) / density
    x = np.where(upper, -z, z)
    return _as_output(x, scalar)


def normalized_legendre_table(
    ell: int,
    theta: np.ndarray,
    with_derivative: bool = True
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Orthonormal associated Legendre functions of degree ell for m = 0..ell

    Values are N_ell^m P_ell^m(cos theta) with (2 pi) * int (.)^2 d(cos theta) = 1,
    no Condon-Shortley phase. The diagonal seeds are built in log space
    and the degree recurrence runs for all orders at once.

    Args:
        ell: Degree
        theta: Colatitudes (1-d array)
        with_derivative: Also return d/dtheta (requires 0 < theta < pi)

    Returns:
        (values, dtheta) with shape (ell + 1, len(theta)); dtheta is None
        when not requested
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    cos_t = np.cos(theta)
    sin_t = np.sin(theta)
    orders = np.arange(ell + 1, dtype=float)

    ks = np.arange(1, ell + 1, dtype=float)
    diag_log = -0.5 * math.log(4.0 * math.pi) + 0.5 * np.concatenate(
        ([0.0], np.cumsum(np.log((2.0 * ks + 1.0) / (2.0 * ks))))
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        log_sin = np.log(sin_t)
        exponent = diag_log[:, None] + np.where(
            orders[:, None] == 0, 0.0, orders[:, None] * log_sin[None, :]
        )
    current = np.exp(exponent)
    previous = np.zeros_like(current)

    values = np.empty((ell + 1, theta.size))
    lower = np.empty((ell + 1, theta.size))
    values[ell] = current[ell]
    lower[ell] = 0.0

    for k in range(1, ell + 1):
        rows = ell - k + 1
        m = orders[:rows]
        n = m + k
        a = np.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
        b = np.sqrt(np.abs(
            (2.0 * n + 1.0) * ((n - 1.0) ** 2 - m * m) / ((2.0 * n - 3.0) * (n * n - m * m))
        ))
        nxt = a[:, None] * cos_t[None, :] * current[:rows] - b[:, None] * previous[:rows]
        previous = current[:rows]
        current = nxt
        values[rows - 1] = current[rows - 1]
        lower[rows - 1] = previous[rows - 1]

    if not with_derivative:
        return values, None

    if ell == 0:
        return values, np.zeros_like(values)
    if np.any(sin_t <= 0.0):
        raise DomainError("colatitude derivatives are undefined at the poles")
    coupling = np.sqrt((2.0 * ell + 1.0) / (2.0 * ell - 1.0) * (ell * ell - orders * orders))
    dtheta = (ell * cos_t[None, :] * values - coupling[:, None] * lower) / sin_t[None, :]
    return values, dtheta


def cached_legendre_table(ell: int, grid: QuadratureGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Normalized Legendre table and derivative on the grid colatitudes (cached)"""
    key = {"ell": int(ell), "n_theta": grid.n_theta}
    return cache_manager.get_or_compute(
        "legendre_table",
        key,
        lambda: normalized_legendre_table(ell, grid.theta, with_derivative=True),
    )


def spherical_grid(n_theta: int, n_phi: int) -> QuadratureGrid:
    """
    Build a QuadratureGrid

    Args:
        n_theta: Number of Gauss-Legendre colatitudes
        n_phi: Number of equispaced longitudes

    Returns:
        QuadratureGrid ordered by increasing colatitude
    """
    if n_theta < 1 or n_phi < 1:
        raise DomainError(f"grid sizes must be positive, got ({n_theta}, {n_phi})")
    nodes, weights = gauss_legendre(n_theta)
    colat_nodes = nodes[::-1].copy()
    colat_weights = weights[::-1].copy()
    colat_nodes.setflags(write=False)
    colat_weights.setflags(write=False)
    return QuadratureGrid(
        colat_nodes=colat_nodes,
        colat_weights=colat_weights,
        n_phi=int(n_phi),
        exact_degree=int(min(2 * n_theta - 1, n_phi - 1)),
    )


def grid_for_degree(
    ell: int,
    theta_mult: Optional[float] = None,
    phi_mult: Optional[float] = None,
    grid_mult: Optional[float] = None,
    min_theta_nodes: Optional[int] = None
) -> QuadratureGrid:
    """
    Default grid policy for degree ell

    N_theta = max(theta_mult * ell * grid_mult, 2 ell + 1, min_theta_nodes) and
    N_phi = max(phi_mult * ell * grid_mult, 4 ell + 2, 2 N_theta), rounded up to
    even, so both the nodal-geometry floor and the 4 ell exactness floor hold.
    """
    theta_mult = settings.theta_mult if theta_mult is None else theta_mult
    phi_mult = settings.phi_mult if phi_mult is None else phi_mult
    grid_mult = settings.grid_mult if grid_mult is None else grid_mult
    min_theta_nodes = settings.min_theta_nodes if min_theta_nodes is None else min_theta_nodes
    n_theta, n_phi = planned_grid_size(ell, theta_mult, phi_mult, grid_mult, min_theta_nodes)
    return spherical_grid(n_theta, n_phi)


def planned_grid_size(
    ell: int,
    theta_mult: float,
    phi_mult: float,
    grid_mult: float,
    min_theta_nodes: int
) -> Tuple[int, int]:
    if ell < 0:
        raise DomainError(f"degree must be nonnegative, got {ell}")
    if grid_mult <= 0:
        raise DomainError(f"grid multiplier must be positive, got {grid_mult}")
    n_theta = max(math.ceil(theta_mult * ell * grid_mult), 2 * ell + 1, int(min_theta_nodes))
    n_phi = max(math.ceil(phi_mult * ell * grid_mult), 4 * ell + 2, 2 * n_theta)
    n_phi += n_phi % 2
    return n_theta, n_phi


def require_exactness(grid: QuadratureGrid, degree: int, what: str) -> None:
    """Refuse a grid whose exactness degree is below degree"""
    if grid.exact_degree < degree:
        required = ((degree + 2) // 2, degree + 1)
        raise ResolutionError(f"{what} needs exactness degree {degree}", required, grid.shape)
