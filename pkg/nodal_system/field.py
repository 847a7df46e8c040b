"""
Random Spherical Harmonics for NODAL LAB
Counter-based sampling of the Gaussian coefficients and synthesis of
f, d_theta f and (1/sin theta) d_phi f on quadrature grids
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, TypeVar

import numpy as np
import pandas as pd

from core.config_manager import settings
from core.exceptions import DomainError, ResolutionError
from nodal_system.specfun import (
    ArrayLike,
    DegreeParams,
    QuadratureGrid,
    cached_legendre_table,
    gaussian_quantile,
    normalized_legendre_table,
)

logger = logging.getLogger(__name__)

SEED_MODULUS = 1 << 64
MAX_REPLICATE = 1 << 48
MAX_STREAM_TAG = 1 << 16
ROW_BLOCK = 64

T = TypeVar("T")


def counter_uniforms(master_seed: int, replicate: int, tag: int, count: int) -> np.ndarray:
    """
    Uniforms in (0, 1) from a Philox stream keyed by (master_seed, replicate, tag)

    Each raw 64-bit word keeps its top 53 bits k and maps to (k + 1/2) 2^-53.

    Args:
        master_seed: Any integer, reduced modulo 2^64
        replicate: Replicate index in [0, 2^48)
        tag: Stream tag in [0, 2^16) (the degree for coefficient streams)
        count: Number of uniforms
    """
    if not 0 <= replicate < MAX_REPLICATE:
        raise DomainError(f"replicate index must lie in [0, 2^48), got {replicate}")
    if not 0 <= tag < MAX_STREAM_TAG:
        raise DomainError(f"stream tag must lie in [0, 2^16), got {tag}")
    key = np.array(
        [int(master_seed) % SEED_MODULUS, (int(replicate) << 16) | int(tag)],
        dtype=np.uint64,
    )
    raw = np.random.Philox(key=key).random_raw(int(count))
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def counter_normals(master_seed: int, replicate: int, tag: int, count: int) -> np.ndarray:
    """Standard normal deviates by inverse-CDF transform of counter_uniforms"""
    return np.asarray(gaussian_quantile(counter_uniforms(master_seed, replicate, tag, count)))


@dataclass(frozen=True)
class HarmonicCoefficients:
    """
    Coefficients a_m, m = -ell..ell, of the real orthonormal basis

    Y_{l,0} = N P_l, Y_{l,m} = sqrt(2) N P_l^m cos(m phi) for m > 0 and
    Y_{l,-m} = sqrt(2) N P_l^m sin(m phi).
    """

    params: DegreeParams
    a: np.ndarray

    def __post_init__(self):
        if self.a.shape != (2 * self.params.ell + 1,):
            raise DomainError(
                f"expected {2 * self.params.ell + 1} coefficients for ell={self.params.ell}, "
                f"got shape {self.a.shape}"
            )
        self.a.setflags(write=False)

    @classmethod
    def from_values(cls, ell: int, values) -> "HarmonicCoefficients":
        return cls(params=DegreeParams.from_ell(ell), a=np.array(values, dtype=float))

    def trig_coefficients(self) -> Tuple[np.ndarray, np.ndarray]:
        """(cos, sin) series coefficients for m = 0..ell, before the sqrt(4pi/(2l+1)) scale"""
        ell = self.params.ell
        cos_part = np.empty(ell + 1)
        sin_part = np.zeros(ell + 1)
        cos_part[0] = self.a[ell]
        cos_part[1:] = math.sqrt(2.0) * self.a[ell + 1:]
        sin_part[1:] = math.sqrt(2.0) * self.a[ell - 1::-1][:ell] if ell else 0.0
        return cos_part, sin_part


@dataclass(frozen=True)
class FieldGrid:
    """Values of f, d1 = d_theta f and d2 = (1/sin theta) d_phi f on a grid"""

    coeffs: HarmonicCoefficients
    grid: QuadratureGrid
    f: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    @property
    def params(self) -> DegreeParams:
        return self.coeffs.params

    def to_frame(self) -> pd.DataFrame:
        """Long-format table with columns theta, phi, f, d1, d2"""
        theta, phi = np.meshgrid(self.grid.theta, self.grid.phi, indexing="ij")
        return pd.DataFrame({
            "theta": theta.ravel(),
            "phi": phi.ravel(),
            "f": self.f.ravel(),
            "d1": self.d1.ravel(),
            "d2": self.d2.ravel(),
        })


def sample_coefficients(
    params: DegreeParams,
    master_seed: int,
    replicate: int
) -> HarmonicCoefficients:
    """
    Draw the 2 ell + 1 i.i.d. standard normal coefficients of one replicate

    Args:
        params: Degree parameters
        master_seed: Campaign seed
        replicate: Replicate index

    Returns:
        HarmonicCoefficients, a pure function of (master_seed, replicate, ell)
    """
    deviates = counter_normals(master_seed, replicate, params.ell, 2 * params.ell + 1)
    return HarmonicCoefficients(params=params, a=deviates)


def _synthesize_rows(
    coeffs: HarmonicCoefficients,
    grid: QuadratureGrid,
    rows: slice
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    ell = coeffs.params.ell
    n_phi = grid.n_phi
    values, dtheta = cached_legendre_table(ell, grid)
    values = values[:, rows].T
    dtheta = dtheta[:, rows].T
    sin_t = np.sqrt(1.0 - grid.colat_nodes[rows] ** 2)

    scale = math.sqrt(4.0 * math.pi / (2 * ell + 1))
    cos_part, sin_part = coeffs.trig_coefficients()
    orders = np.arange(ell + 1, dtype=float)

    def to_grid(cos_coef: np.ndarray, sin_coef: np.ndarray) -> np.ndarray:
        spectrum = np.zeros((cos_coef.shape[0], n_phi // 2 + 1), dtype=complex)
        spectrum[:, :ell + 1] = 0.5 * n_phi * (cos_coef - 1j * sin_coef)
        spectrum[:, 0] = n_phi * cos_coef[:, 0]
        return np.fft.irfft(spectrum, n=n_phi, axis=1)

    f = to_grid(scale * values * cos_part, scale * values * sin_part)
    d1 = to_grid(scale * dtheta * cos_part, scale * dtheta * sin_part)
    d2 = to_grid(
        scale * values * (orders * sin_part),
        scale * values * (-orders * cos_part),
    ) / sin_t[:, None]
    return f, d1, d2


def synthesize(
    coeffs: HarmonicCoefficients,
    grid: QuadratureGrid,
    workers: Optional[int] = None
) -> FieldGrid:
    """
    Evaluate f and its gradient components at every grid node

    Latitude rows are independent; row blocks are spread over a thread pool
    and each block writes its own slice, so the result does not depend on
    the worker count.

    Args:
        coeffs: Field coefficients
        grid: Quadrature grid with exact_degree >= ell and n_phi >= 2 ell + 1
        workers: Thread count (defaults to settings.threads)

    Returns:
        Immutable FieldGrid
    """
    n_theta, n_phi = grid.shape
    f = np.empty((n_theta, n_phi))
    d1 = np.empty((n_theta, n_phi))
    d2 = np.empty((n_theta, n_phi))

    def fill(rows: slice, f_rows: np.ndarray, d1_rows: np.ndarray, d2_rows: np.ndarray) -> None:
        f[rows], d1[rows], d2[rows] = f_rows, d1_rows, d2_rows

    reduce_row_blocks(coeffs, grid, fill, workers=workers)

    for array in (f, d1, d2):
        array.setflags(write=False)
    return FieldGrid(coeffs=coeffs, grid=grid, f=f, d1=d1, d2=d2)


def reduce_row_blocks(
    coeffs: HarmonicCoefficients,
    grid: QuadratureGrid,
    reducer: Callable[[slice, np.ndarray, np.ndarray, np.ndarray], T],
    workers: Optional[int] = None
) -> List[T]:
    """
    Synthesize latitude blocks of (f, d1, d2) and hand each to reducer

    Only one block per worker is alive at a time, so grids far larger than
    a FieldGrid can hold are still usable for quadratures.

    Args:
        coeffs: Field coefficients
        grid: Quadrature grid with exact_degree >= ell and n_phi >= 2 ell + 1
        reducer: Called as reducer(rows, f, d1, d2) for every block
        workers: Thread count (defaults to settings.threads)

    Returns:
        Reducer results in block order, independent of the worker count
    """
    ell = coeffs.params.ell
    if grid.exact_degree < ell or grid.n_phi < 2 * ell + 1:
        raise ResolutionError(
            f"synthesis of degree {ell}",
            required=((ell + 2) // 2, 2 * ell + 1),
            actual=grid.shape,
        )

    n_theta = grid.n_theta
    blocks = [slice(start, min(start + ROW_BLOCK, n_theta)) for start in range(0, n_theta, ROW_BLOCK)]

    def run(rows: slice) -> T:
        return reducer(rows, *_synthesize_rows(coeffs, grid, rows))

    workers = settings.threads if workers is None else workers
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, blocks))
    return [run(rows) for rows in blocks]


def _series(
    coeffs: HarmonicCoefficients,
    table: np.ndarray,
    phi: np.ndarray,
    derivative: bool = False
) -> np.ndarray:
    ell = coeffs.params.ell
    orders = np.arange(ell + 1, dtype=float)[:, None]
    cos_part, sin_part = coeffs.trig_coefficients()
    cos_m = np.cos(orders * phi[None, :])
    sin_m = np.sin(orders * phi[None, :])
    if derivative:
        trig = orders * (sin_part[:, None] * cos_m - cos_part[:, None] * sin_m)
    else:
        trig = cos_part[:, None] * cos_m + sin_part[:, None] * sin_m
    return math.sqrt(4.0 * math.pi / (2 * ell + 1)) * np.sum(table * trig, axis=0)


def eval_point(
    coeffs: HarmonicCoefficients,
    theta: ArrayLike,
    phi: ArrayLike
) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
    """
    Direct evaluation of (f, d1, d2) at arbitrary points off the poles

    Args:
        coeffs: Field coefficients
        theta: Colatitude(s) in (0, pi)
        phi: Longitude(s)

    Returns:
        (f, d1, d2) broadcast to the shape of the inputs
    """
    theta_arr, phi_arr = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    scalar = theta_arr.ndim == 0
    if np.any(theta_arr <= 0.0) or np.any(theta_arr >= np.pi):
        raise DomainError("eval_point needs 0 < theta < pi (gradients are undefined at the poles)")

    flat_theta = theta_arr.ravel()
    flat_phi = phi_arr.ravel()
    values, dtheta = normalized_legendre_table(coeffs.params.ell, flat_theta, with_derivative=True)
    f = _series(coeffs, values, flat_phi)
    d1 = _series(coeffs, dtheta, flat_phi)
    d2 = _series(coeffs, values, flat_phi, derivative=True) / np.sin(flat_theta)

    if scalar:
        return float(f[0]), float(d1[0]), float(d2[0])
    shape = theta_arr.shape
    return f.reshape(shape), d1.reshape(shape), d2.reshape(shape)


def eval_value(coeffs: HarmonicCoefficients, theta: ArrayLike, phi: ArrayLike) -> ArrayLike:
    """Field value only; theta may be 0 or pi (only m = 0 survives there)"""
    theta_arr, phi_arr = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    if np.any(theta_arr < 0.0) or np.any(theta_arr > np.pi):
        raise DomainError("eval_value needs 0 <= theta <= pi")
    values, _ = normalized_legendre_table(coeffs.params.ell, theta_arr.ravel(), with_derivative=False)
    f = _series(coeffs, values, phi_arr.ravel())
    if theta_arr.ndim == 0:
        return float(f[0])
    return f.reshape(theta_arr.shape)
