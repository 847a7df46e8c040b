"""
Campaign Statistics for NODAL LAB
Standardization, Wasserstein distance to the Gaussian, fourth cumulants,
the L2 gap between standardized functionals and jackknife standard errors

Every standardization divides by the sample deviation (ddof=1).
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np

from core.cache_manager import cache_manager
from core.config_manager import settings
from core.exceptions import DomainError, NodalLabError
from nodal_system.field import counter_normals
from nodal_system.specfun import gaussian_quantile

logger = logging.getLogger(__name__)

MIN_WASSERSTEIN_SAMPLES = 30
MIN_CUMULANT_SAMPLES = 100
MIN_GAP_SAMPLES = 30
GAP_IDENTITY_TOL = 1e-10
CALIBRATION_TAG = 0xFFFF


def _as_samples(samples: Sequence[float], minimum: int, what: str) -> np.ndarray:
    values = np.asarray(samples, dtype=float).ravel()
    if values.size < minimum:
        raise DomainError(f"{what} needs at least {minimum} samples, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise DomainError(f"{what} received non-finite samples")
    if np.ptp(values) == 0.0:
        raise DomainError(f"{what} received a degenerate (constant) sample")
    return values


def standardize(samples: Sequence[float]) -> np.ndarray:
    """(x - mean) / s with the sample deviation s (ddof=1)"""
    values = _as_samples(samples, 2, "standardize")
    return (values - values.mean()) / values.std(ddof=1)


def empirical_wasserstein(samples: Sequence[float]) -> float:
    """
    Wasserstein distance between the standardized sample and N(0, 1)

    Midpoint rule for the integral of |F_n^-1(t) - Phi^-1(t)| on n
    subintervals: the k-th order statistic against Phi^-1((k - 1/2)/n).

    Args:
        samples: At least 30 finite, non-constant values

    Returns:
        The distance
    """
    values = _as_samples(samples, MIN_WASSERSTEIN_SAMPLES, "empirical_wasserstein")
    ordered = np.sort((values - values.mean()) / values.std(ddof=1))
    n = ordered.size
    quantiles = np.asarray(gaussian_quantile((np.arange(1, n + 1) - 0.5) / n))
    return float(np.mean(np.abs(ordered - quantiles)))


def fourth_cumulant(samples: Sequence[float]) -> float:
    """Centered fourth cumulant m4 - 3 m2^2 from the central moments of the sample"""
    values = _as_samples(samples, MIN_CUMULANT_SAMPLES, "fourth_cumulant")
    centered = values - values.mean()
    m2 = np.mean(centered ** 2)
    m4 = np.mean(centered ** 4)
    return float(m4 - 3.0 * m2 * m2)


def standardized_cumulant(samples: Sequence[float]) -> float:
    """
    Fourth cumulant of the standardized sample, fourth_cumulant(standardize(x))

    Every standardized quantity in this module divides by the sample
    deviation with ddof=1, so this is (m4 - 3 m2^2) / s^4 and matches the
    sample fed to empirical_wasserstein.
    """
    values = _as_samples(samples, MIN_CUMULANT_SAMPLES, "standardized_cumulant")
    return fourth_cumulant(standardize(values))


def sample_correlation(x: Sequence[float], y: Sequence[float]) -> float:
    x_arr = _as_samples(x, 2, "sample_correlation")
    y_arr = _as_samples(y, 2, "sample_correlation")
    if x_arr.size != y_arr.size:
        raise DomainError(f"sample_correlation needs matched samples, got {x_arr.size} and {y_arr.size}")
    return float(np.clip(np.corrcoef(x_arr, y_arr)[0, 1], -1.0, 1.0))


def l2_gap(
    l_samples: Sequence[float],
    m_samples: Sequence[float],
    means: Optional[tuple] = None
) -> float:
    """
    Mean squared difference of standardized, replicate-matched pairs

    Pairs are standardized with the sample deviation (ddof=1) and the squared
    gaps are averaged over n - 1, so with sample means (the default) the gap
    equals 2 (1 - corr) exactly, which is checked on every call.

    Args:
        l_samples: Lengths per replicate
        m_samples: M per replicate
        means: Optional (mean_L, mean_M) to standardize around analytic
            means instead of sample means

    Returns:
        E[(L~ - M~)^2] estimate
    """
    l_arr = _as_samples(l_samples, MIN_GAP_SAMPLES, "l2_gap")
    m_arr = _as_samples(m_samples, MIN_GAP_SAMPLES, "l2_gap")
    if l_arr.size != m_arr.size:
        raise DomainError(f"l2_gap needs matched samples, got {l_arr.size} and {m_arr.size}")

    centers = means if means is not None else (l_arr.mean(), m_arr.mean())
    l_std = (l_arr - centers[0]) / l_arr.std(ddof=1)
    m_std = (m_arr - centers[1]) / m_arr.std(ddof=1)
    gap = float(np.sum((l_std - m_std) ** 2) / (l_arr.size - 1))
    if means is not None:
        return gap

    identity = 2.0 * (1.0 - float(np.corrcoef(l_arr, m_arr)[0, 1]))
    if abs(gap - identity) > GAP_IDENTITY_TOL:
        raise NodalLabError(f"l2_gap {gap!r} disagrees with 2(1 - corr) = {identity!r}")
    return gap


def _leave_one_out_moments(values: np.ndarray, order: int) -> np.ndarray:
    """Raw moments 1..order of every leave-one-out sample, about the full-sample mean"""
    centered = values - values.mean()
    n = centered.size
    powers = np.stack([centered ** k for k in range(1, order + 1)])
    totals = powers.sum(axis=1, keepdims=True)
    return (totals - powers) / (n - 1)


def _leave_one_out_statistic(statistic: str, samples: Sequence[np.ndarray]) -> np.ndarray:
    if statistic == "mean":
        (x,) = samples
        return (x.sum() - x) / (x.size - 1)

    if statistic == "variance":
        (x,) = samples
        n = x.size
        r1, r2 = _leave_one_out_moments(x, 2)
        return (r2 - r1 ** 2) * (n - 1) / (n - 2)

    if statistic in ("covariance", "correlation"):
        x, y = samples
        n = x.size
        xc, yc = x - x.mean(), y - y.mean()
        rx1, rx2 = _leave_one_out_moments(x, 2)
        ry1, ry2 = _leave_one_out_moments(y, 2)
        rxy = (np.sum(xc * yc) - xc * yc) / (n - 1)
        cov = rxy - rx1 * ry1
        if statistic == "covariance":
            return cov * (n - 1) / (n - 2)
        return cov / np.sqrt((rx2 - rx1 ** 2) * (ry2 - ry1 ** 2))

    if statistic in ("cum4", "standardized_cum4"):
        (x,) = samples
        r1, r2, r3, r4 = _leave_one_out_moments(x, 4)
        mu2 = r2 - r1 ** 2
        mu4 = r4 - 4.0 * r3 * r1 + 6.0 * r2 * r1 ** 2 - 3.0 * r1 ** 4
        cum4 = mu4 - 3.0 * mu2 ** 2
        if statistic == "cum4":
            return cum4
        n = x.size
        # leave-one-out samples have n - 1 values, so s^2 = mu2 (n - 1) / (n - 2)
        return cum4 / (mu2 * (n - 1) / (n - 2)) ** 2

    raise DomainError(f"unknown jackknife statistic: {statistic}")


def jackknife_se(statistic: str, *samples: Sequence[float]) -> float:
    """
    Jackknife standard error from closed-form leave-one-out moments

    Args:
        statistic: "mean", "variance", "covariance", "correlation", "cum4"
            or "standardized_cum4"
        *samples: One sample, or two matched samples for covariance and
            correlation

    Returns:
        sqrt((n - 1)/n * sum_i (theta_i - mean theta)^2)
    """
    arrays = [np.asarray(s, dtype=float).ravel() for s in samples]
    n = arrays[0].size
    if n < 3:
        raise DomainError(f"jackknife needs at least 3 samples, got {n}")
    if any(a.size != n for a in arrays):
        raise DomainError("jackknife samples must have equal lengths")
    replicates = _leave_one_out_statistic(statistic, arrays)
    spread = replicates - replicates.mean()
    return float(math.sqrt((n - 1) / n * np.sum(spread ** 2)))


def wasserstein_noise_floor(
    n: int,
    repetitions: Optional[int] = None,
    seed: Optional[int] = None
) -> float:
    """
    Mean Wasserstein self-distance of exact Gaussian samples of size n

    Samples come from the counter-based stream under the calibration seed,
    one replicate index per repetition.
    """
    if n < MIN_WASSERSTEIN_SAMPLES:
        raise DomainError(f"noise floor needs n >= {MIN_WASSERSTEIN_SAMPLES}, got {n}")
    repetitions = settings.calibration_repetitions if repetitions is None else repetitions
    seed = settings.calibration_seed if seed is None else seed

    def calibrate() -> float:
        distances = [
            empirical_wasserstein(counter_normals(seed, rep, CALIBRATION_TAG, n))
            for rep in range(repetitions)
        ]
        floor = float(np.mean(distances))
        logger.debug(f"Wasserstein noise floor n={n}: {floor:.5f}")
        return floor

    return cache_manager.get_or_compute(
        "wasserstein_noise_floor",
        {"n": int(n), "repetitions": int(repetitions), "seed": int(seed)},
        calibrate,
    )


def stein_bound(samples: Sequence[float]) -> float:
    """
    Fourth-moment bound sqrt(max(standardized_cumulant, 0) / (2 pi)) on the
    Wasserstein distance of a standardized fourth-chaos variable
    """
    return math.sqrt(max(standardized_cumulant(samples), 0.0) / (2.0 * math.pi))
