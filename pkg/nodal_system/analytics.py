"""
Closed-Form Analytics for NODAL LAB
Two-point covariances of the field and its gradient, the exact and
asymptotic cross-correlation between the fourth-chaos integrand and the
trispectrum, deterministic variance and covariance integrals, Kac-Rice
asymptotics, conditional Gaussian statistics and level-z chaos formulas
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, NamedTuple, Sequence, Tuple

import numpy as np
import pandas as pd

from core.exceptions import DomainError
from nodal_system.chaos import ChaosCoeffs, hermite_product_expectation
from nodal_system.specfun import ArrayLike, DegreeParams, gauss_legendre, legendre_triple

logger = logging.getLogger(__name__)

# Boundary between the O(ell) head and the oscillatory regime of J
HEAD_CUTOFF = 10.0
HEAD_NODES_PER_PANEL = 16
TAIL_NODES_PER_PANEL = 8

TERM_ORDERS = {
    "A": (4, 0, 0),
    "B": (2, 2, 0),
    "C": (0, 4, 0),
    "D": (0, 2, 2),
    "E": (2, 0, 2),
    "F": (0, 0, 4),
}


def _as_output(value: np.ndarray, scalar: bool) -> ArrayLike:
    return float(value) if scalar else value


def _check_colatitude(theta: ArrayLike) -> np.ndarray:
    theta_arr = np.asarray(theta, dtype=float)
    if np.any(~(theta_arr > 0.0)) or np.any(~(theta_arr < math.pi)):
        raise DomainError("colatitude must lie in the open interval (0, pi)")
    return theta_arr


def _check_scaled_angle(params: DegreeParams, psi: ArrayLike) -> np.ndarray:
    psi_arr = np.asarray(psi, dtype=float)
    upper = params.big_l * math.pi
    if np.any(~(psi_arr > 0.0)) or np.any(~(psi_arr < upper)):
        raise DomainError(f"scaled angle must lie in (0, {upper:.6g}) for ell={params.ell}")
    return psi_arr


def _require_positive_degree(params: DegreeParams, what: str) -> None:
    if params.ell < 1:
        raise DomainError(f"{what} needs ell >= 1")


@dataclass(frozen=True)
class TwoPointCovariance:
    """
    Covariances between (f, d1 f, d2 f) at the north pole and at (theta, 0)

    c_ij = E[D_i f(north) D_j f(y)] for i <= j, D = (id, d_theta, (1/sin) d_phi)
    """

    theta: float
    c00: float
    c01: float
    c02: float
    c11: float
    c12: float
    c22: float

    def as_matrix(self) -> np.ndarray:
        """
        Full 3x3 cross-covariance; the lower entries follow from the
        meridian symmetry (E[d1 f(north) f(y)] = -c01, the rest vanish)
        """
        return np.array([
            [self.c00, self.c01, self.c02],
            [-self.c01, self.c11, self.c12],
            [-self.c02, -self.c12, self.c22],
        ])


def two_point_cov(params: DegreeParams, theta: float) -> TwoPointCovariance:
    """
    Covariance entries at x = north pole, y = (theta, 0)

    Args:
        params: Degree parameters
        theta: Colatitude in (0, pi)

    Returns:
        TwoPointCovariance
    """
    theta = float(_check_colatitude(theta))
    triple = legendre_triple(params, math.cos(theta))
    sin_t, cos_t = math.sin(theta), math.cos(theta)
    return TwoPointCovariance(
        theta=theta,
        c00=triple.p,
        c01=-triple.dp * sin_t,
        c02=0.0,
        c11=triple.dp * cos_t - triple.ddp * sin_t ** 2,
        c12=0.0,
        c22=triple.dp,
    )


def cross_covariance(
    params: DegreeParams,
    x: Tuple[float, float],
    y: Tuple[float, float]
) -> np.ndarray:
    """
    E[D_i f(x) D_j f(y)] for arbitrary points

    Derivatives of the covariance kernel P(<x, y>) with
    <x, y> = cos(tx) cos(ty) + sin(tx) sin(ty) cos(px - py).

    Args:
        params: Degree parameters
        x: (colatitude, longitude) of the first point
        y: (colatitude, longitude) of the second point

    Returns:
        3x3 matrix indexed by D_i at x (rows) and D_j at y (columns)
    """
    (theta_x, phi_x), (theta_y, phi_y) = x, y
    sx, cx = math.sin(theta_x), math.cos(theta_x)
    sy, cy = math.sin(theta_y), math.cos(theta_y)
    delta = phi_x - phi_y
    sd, cd = math.sin(delta), math.cos(delta)

    inner = min(1.0, max(-1.0, cx * cy + sx * sy * cd))
    triple = legendre_triple(params, inner)
    p, dp, ddp = triple.p, triple.dp, triple.ddp

    gx = -sx * cy + cx * sy * cd
    gy = -cx * sy + sx * cy * cd
    return np.array([
        [p, dp * gy, dp * sx * sd],
        [dp * gx, ddp * gx * gy + dp * (sx * sy + cx * cy * cd), ddp * gx * sx * sd + dp * cx * sd],
        [-dp * sy * sd, -ddp * sy * sd * gy - dp * cy * sd, -ddp * sx * sy * sd ** 2 + dp * cd],
    ])


def cross_corr_exact(params: DegreeParams, psi: ArrayLike) -> ArrayLike:
    """
    Exact cross-correlation J(psi) between the fourth-chaos integrand and
    the trispectrum integrand, at colatitude psi/L

    J = (8 pi^2/L)(E[A M] + E[B M] + E[C M]); the three remaining terms
    vanish on the meridian.

    Args:
        params: Degree parameters (ell >= 1)
        psi: Scaled angle(s) in (0, L pi)
    """
    _require_positive_degree(params, "cross_corr_exact")
    scalar = np.ndim(psi) == 0
    psi_arr = _check_scaled_angle(params, psi)

    theta = psi_arr / params.big_l
    triple = legendre_triple(params, np.cos(theta))
    p = np.asarray(triple.p)
    s1 = np.asarray(triple.dp) * np.sin(theta)
    lam = float(params.lam)

    term_a = -(lam / 2.0) / 64.0 * p ** 4
    term_b = (lam / 2.0) / 64.0 * (2.0 / lam) * p ** 2 * s1 ** 2
    term_c = (lam / 2.0) * (3.0 / 16.0) / 24.0 / lam ** 2 * s1 ** 4
    value = 8.0 * math.pi ** 2 / params.big_l * (term_a + term_b + term_c)
    return _as_output(value, scalar)


def _meridian_correlations(params: DegreeParams, psi: float) -> np.ndarray:
    """Correlation matrix of (f, u1, u2) at the pole and f at (psi/L, 0)"""
    cov = two_point_cov(params, psi / params.big_l)
    corr_f = cov.c00
    corr_u1 = -cov.c01 / params.gradient_scale
    return np.array([
        [1.0, 0.0, 0.0, corr_f],
        [0.0, 1.0, 0.0, corr_u1],
        [0.0, 0.0, 1.0, cov.c02 / params.gradient_scale],
        [corr_f, corr_u1, 0.0, 1.0],
    ])


def cross_corr_terms(params: DegreeParams, psi: float) -> Dict[str, float]:
    """
    Contribution of each of the six fourth-chaos integrands to J(psi)

    Each term is evaluated with the diagram formula, independently of the
    closed form used by cross_corr_exact.

    Returns:
        Map "A".."F" -> contribution; D, E and F are identically zero
    """
    _require_positive_degree(params, "cross_corr_terms")
    psi = float(_check_scaled_angle(params, psi))
    corr = _meridian_correlations(params, psi)
    weights = ChaosCoeffs.up_to(4).fourth_chaos_weights()
    scale = params.gradient_scale
    prefactor = 8.0 * math.pi ** 2 / params.big_l * scale * (-0.25 * scale / 24.0)

    terms = {}
    for name, orders in TERM_ORDERS.items():
        expectation = hermite_product_expectation(list(orders) + [4], corr)
        terms[name] = prefactor * weights[orders] * expectation
    return terms


def cross_corr_diagram(params: DegreeParams, psi: float) -> float:
    """Sum of cross_corr_terms"""
    return float(sum(cross_corr_terms(params, psi).values()))


def cross_corr_asymptotic(
    params: DegreeParams,
    psi: ArrayLike,
    oscillatory: bool = True
) -> Tuple[ArrayLike, ArrayLike]:
    """
    Leading terms of J(psi) for C < psi < L pi/2, with the remainder envelope

    value = (1/64 + (5/64) cos 4psi - (3/16) sin 2psi) / (psi sin(psi/L))

    The envelope sums 1/psi^2 and 1/(ell psi) over sin(psi/L) with unit
    constants, plus (psi/L)^2/(psi sin(psi/L)) for the difference between
    psi sin(psi/L) and L sin^2(psi/L) away from small angles.

    Args:
        params: Degree parameters (ell >= 1)
        psi: Scaled angle(s) in (0, L pi)
        oscillatory: Keep the cos 4psi and sin 2psi terms

    Returns:
        (value, envelope)
    """
    _require_positive_degree(params, "cross_corr_asymptotic")
    scalar = np.ndim(psi) == 0
    psi_arr = _check_scaled_angle(params, psi)

    sin_t = np.sin(psi_arr / params.big_l)
    numerator = np.full_like(psi_arr, 1.0 / 64.0)
    if oscillatory:
        numerator = numerator + 5.0 / 64.0 * np.cos(4.0 * psi_arr) - 3.0 / 16.0 * np.sin(2.0 * psi_arr)
    value = numerator / (psi_arr * sin_t)
    envelope = (
        1.0 / psi_arr ** 2
        + 1.0 / (params.ell * psi_arr)
        + (psi_arr / params.big_l) ** 2 / psi_arr
    ) / sin_t
    return _as_output(value, scalar), _as_output(envelope, scalar)


def cross_corr_bound(params: DegreeParams) -> float:
    """Uniform bound (8 pi^2/L)(lam/2)(17/512) on |J(psi)|, linear in ell"""
    return 8.0 * math.pi ** 2 / params.big_l * (params.lam / 2.0) * 17.0 / 512.0


@dataclass(frozen=True)
class CrossCorrProfile:
    """Exact and asymptotic J over a sweep of scaled angles"""

    ell: int
    psi: np.ndarray
    j_exact: np.ndarray
    j_asym: np.ndarray
    envelope: np.ndarray

    def __post_init__(self):
        sizes = {self.psi.shape, self.j_exact.shape, self.j_asym.shape, self.envelope.shape}
        if len(sizes) != 1:
            raise DomainError("profile arrays must share one length")
        if self.psi.size > 1 and np.any(np.diff(self.psi) <= 0):
            raise DomainError("profile angles must be strictly increasing")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "psi": self.psi,
            "j_exact": self.j_exact,
            "j_asym": self.j_asym,
            "envelope": self.envelope,
        })


def cross_corr_profile(params: DegreeParams, psi: Sequence[float]) -> CrossCorrProfile:
    """
    Tabulate J and its asymptotic form

    Args:
        params: Degree parameters (ell >= 1)
        psi: Strictly increasing scaled angles in (0, L pi)

    Returns:
        CrossCorrProfile
    """
    psi_arr = np.atleast_1d(np.asarray(psi, dtype=float))
    value, envelope = cross_corr_asymptotic(params, psi_arr)
    return CrossCorrProfile(
        ell=params.ell,
        psi=psi_arr,
        j_exact=np.atleast_1d(cross_corr_exact(params, psi_arr)),
        j_asym=np.atleast_1d(value),
        envelope=np.atleast_1d(envelope),
    )


def _panel_nodes(start: float, stop: float, nodes_per_panel: int) -> Tuple[np.ndarray, np.ndarray]:
    if stop <= start:
        return np.zeros(0), np.zeros(0)
    n_panels = int(math.ceil(stop - start))
    edges = np.linspace(start, stop, n_panels + 1)
    x, w = gauss_legendre(nodes_per_panel)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    return (mid + half * x[None, :]).ravel(), (half * w[None, :]).ravel()


def cov_length_trispectrum(params: DegreeParams) -> float:
    """
    Cov{L, M} as the integral of J(psi) sin(psi/L) over (0, L pi)

    Unit-width Gauss-Legendre panels: 16 nodes per panel on the head
    (0, 10], 8 beyond it, which resolves the cos 4psi oscillation.

    Args:
        params: Degree parameters (ell >= 2)

    Returns:
        The covariance
    """
    if params.ell < 2:
        raise DomainError("cov_length_trispectrum needs ell >= 2")
    upper = params.big_l * math.pi
    head_stop = min(HEAD_CUTOFF, upper)
    head_x, head_w = _panel_nodes(0.0, head_stop, HEAD_NODES_PER_PANEL)
    tail_x, tail_w = _panel_nodes(head_stop, upper, TAIL_NODES_PER_PANEL)
    psi = np.concatenate([head_x, tail_x])
    weights = np.concatenate([head_w, tail_w])

    integrand = np.asarray(cross_corr_exact(params, psi)) * np.sin(psi / params.big_l)
    covariance = float(np.dot(weights, integrand))
    logger.debug(f"Cov(L, M) at ell={params.ell}: {covariance:.6f} from {psi.size} nodes")
    return covariance


def var_trispectrum_exact(params: DegreeParams) -> float:
    """
    Var{M} = (lam/2)(1/16)(1/576) 8 pi^2 4! int_{-1}^{1} P_ell(x)^4 dx

    P^4 has degree 4 ell, so 2 ell + 1 Gauss-Legendre nodes are exact.
    """
    _require_positive_degree(params, "var_trispectrum_exact")
    nodes, weights = gauss_legendre(2 * params.ell + 1)
    p = np.asarray(legendre_triple(params, nodes).p)
    integral = float(np.dot(weights, p ** 4))
    return (params.lam / 2.0) / 16.0 / 576.0 * 8.0 * math.pi ** 2 * 24.0 * integral


def kac_rice_two_point_asymptotic(
    params: DegreeParams,
    psi: ArrayLike,
    oscillatory: bool = True
) -> ArrayLike:
    """
    Asymptotic excess K(psi) - 1/4 of the nodal two-point correlation function

    Args:
        params: Degree parameters (ell >= 1)
        psi: Scaled angle(s), meaningful on (C, L pi/2)
        oscillatory: Keep the sin/cos terms; False leaves the 1/256 term

    Returns:
        K(psi) - 1/4
    """
    _require_positive_degree(params, "kac_rice_two_point_asymptotic")
    scalar = np.ndim(psi) == 0
    psi_arr = _check_scaled_angle(params, psi)

    ell = float(params.ell)
    sin_t = np.sin(psi_arr / params.big_l)
    denom = psi_arr * sin_t
    value = (1.0 / 256.0) / (math.pi ** 2 * ell * denom)
    if oscillatory:
        value = value + (
            0.5 * np.sin(2.0 * psi_arr) / (math.pi * ell * sin_t)
            + (9.0 / 32.0) * np.cos(2.0 * psi_arr) / (math.pi * ell * denom)
            + ((27.0 / 64.0) * np.sin(2.0 * psi_arr) - (75.0 / 256.0) * np.cos(4.0 * psi_arr))
            / (math.pi ** 2 * ell * denom)
        )
    return _as_output(value, scalar)


@dataclass(frozen=True)
class ConditionalGradient:
    """
    Gaussian regression of the two gradients on (f(north), f(y)) = (u, u)

    mean = b_t a_inv (u, u), a_matrix the covariance of the conditioning
    pair and b_t the 4x2 cross-covariance
    """

    mean: np.ndarray
    a_matrix: np.ndarray
    a_inv: np.ndarray
    b_t: np.ndarray


def conditional_gradient_stats(params: DegreeParams, theta: float, u: float) -> ConditionalGradient:
    theta = float(_check_colatitude(theta))
    triple = legendre_triple(params, math.cos(theta))
    p = triple.p
    if abs(p) >= 1.0:
        raise DomainError(f"degenerate correlation P={p} at theta={theta}")
    slope = triple.dp * math.sin(theta)

    a_matrix = np.array([[1.0, p], [p, 1.0]])
    a_inv = np.array([[1.0, -p], [-p, 1.0]]) / (1.0 - p * p)
    b_t = np.array([
        [-slope, 0.0],
        [0.0, 0.0],
        [0.0, slope],
        [0.0, 0.0],
    ])
    mean = np.array([-u * slope, 0.0, u * slope, 0.0]) / (1.0 + p)
    return ConditionalGradient(mean=mean, a_matrix=a_matrix, a_inv=a_inv, b_t=b_t)


def two_point_density(params: DegreeParams, theta: float, u: float) -> float:
    """Bivariate normal density at (u, u) with unit variances and correlation P(cos theta)"""
    theta = float(_check_colatitude(theta))
    p = legendre_triple(params, math.cos(theta)).p
    if abs(p) >= 1.0:
        raise DomainError(f"degenerate correlation P={p} at theta={theta}")
    return math.exp(-u * u / (1.0 + p)) / (2.0 * math.pi * math.sqrt(1.0 - p * p))


class LevelChaos(NamedTuple):
    mean: float
    proj2_coefficient: float


def boundary_length_chaos(params: DegreeParams, z: float) -> LevelChaos:
    """
    Expected level-z boundary length and the multiplier of int H2(f) in
    its second-order chaos projection

    Args:
        params: Degree parameters
        z: Threshold

    Returns:
        LevelChaos(mean, proj2_coefficient)
    """
    density = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    base = 2.0 * params.gradient_scale * math.sqrt(math.pi / 8.0) * density
    return LevelChaos(mean=base * 4.0 * math.pi, proj2_coefficient=base * z * z / 2.0)


def variance_table(ells: Iterable[int]) -> pd.DataFrame:
    """
    Deterministic Var{M}, Cov{L, M} and their ratio across degrees

    Args:
        ells: Degrees >= 2, in the order the rows should appear

    Returns:
        DataFrame with columns ell, var_m, cov_lm, ratio, diff_var_m, diff_cov_lm
    """
    rows = []
    for ell in ells:
        params = DegreeParams.from_ell(ell)
        var_m = var_trispectrum_exact(params)
        cov_lm = cov_length_trispectrum(params)
        rows.append({"ell": params.ell, "var_m": var_m, "cov_lm": cov_lm, "ratio": cov_lm / var_m})
        logger.info(f"Variance scan ell={params.ell}: var_m={var_m:.6f}, cov_lm={cov_lm:.6f}")

    table = pd.DataFrame(rows, columns=["ell", "var_m", "cov_lm", "ratio"])
    table["diff_var_m"] = table["var_m"].diff()
    table["diff_cov_lm"] = table["cov_lm"].diff()
    return table
