"""
Campaign Runner for NODAL LAB
Fans replicates out to a worker pool, gathers functionals in replicate
order and reduces them to one report row per degree
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from core.config_manager import settings
from core.exceptions import DomainError
from core.performance_monitor import performance_monitor
from experiments.models import ExperimentConfig, ExperimentReport, Provenance, ReportRow
from experiments.statistics import (
    MIN_CUMULANT_SAMPLES,
    MIN_GAP_SAMPLES,
    MIN_WASSERSTEIN_SAMPLES,
    empirical_wasserstein,
    fourth_cumulant,
    jackknife_se,
    l2_gap,
    sample_correlation,
    standardized_cumulant,
    stein_bound,
    wasserstein_noise_floor,
)
from nodal_system.analytics import boundary_length_chaos, cov_length_trispectrum, var_trispectrum_exact
from nodal_system.field import sample_coefficients, synthesize
from nodal_system.functionals import FunctionalSample, measure
from nodal_system.specfun import DegreeParams, QuadratureGrid

logger = logging.getLogger(__name__)


def run_replicate(
    config: ExperimentConfig,
    params: DegreeParams,
    grid: QuadratureGrid,
    replicate: int
) -> Tuple[FunctionalSample, Dict[str, float]]:
    """
    Draw, synthesize and measure one replicate

    Returns:
        (sample, per-stage wall times)
    """
    policy = config.grid_policy
    start = time.perf_counter()
    coeffs = sample_coefficients(params, config.master_seed, replicate)
    field = synthesize(coeffs, grid, workers=1)
    synthesized = time.perf_counter()

    sample = measure(
        field,
        seed=config.master_seed,
        replicate=replicate,
        level=config.level,
        nodal=config.nodal,
        epsilon=config.epsilon if config.epsilon_band else None,
        extrapolate=policy.extrapolate,
        allow_under_resolved=policy.allow_under_resolved,
    )
    measured = time.perf_counter()
    return sample, {"synthesis": synthesized - start, "functionals": measured - synthesized}


def run_degree(config: ExperimentConfig, ell: int) -> List[FunctionalSample]:
    """All replicates of one degree, in replicate order"""
    params = DegreeParams.from_ell(ell)
    grid = config.grid_policy.grid(ell)
    logger.info(
        f"Degree {ell}: {config.replicates} replicates on a {grid.n_theta}x{grid.n_phi} grid "
        f"with {config.threads} thread(s)"
    )

    slots: List[Optional[FunctionalSample]] = [None] * config.replicates

    def task(replicate: int) -> None:
        start = time.perf_counter()
        try:
            sample, stages = run_replicate(config, params, grid, replicate)
        except Exception:
            performance_monitor.record_replicate(time.perf_counter() - start, ell, success=False)
            raise
        performance_monitor.record_replicate(time.perf_counter() - start, ell, stages=stages)
        slots[replicate] = sample

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            list(pool.map(task, range(config.replicates)))
    else:
        for replicate in range(config.replicates):
            task(replicate)

    return [sample for sample in slots if sample is not None]


def _column(samples: List[FunctionalSample], name: str) -> np.ndarray:
    return np.array([getattr(sample, name) for sample in samples], dtype=float)


def _mean_with_se(values: np.ndarray) -> Tuple[float, float]:
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def _jackknife(statistic: str, *samples: np.ndarray) -> float:
    # leave-one-out needs three replicates
    if samples[0].size < 3:
        return math.nan
    with np.errstate(divide="ignore", invalid="ignore"):
        return jackknife_se(statistic, *samples)


def _or_nan(statistic: Callable[..., float], *args, **kwargs) -> float:
    """NaN for statistics of degenerate samples (e.g. the constant length at ell = 1)"""
    try:
        return statistic(*args, **kwargs)
    except DomainError as e:
        logger.warning(f"{statistic.__name__} skipped: {e}")
        return math.nan


def summarize_degree(
    config: ExperimentConfig,
    ell: int,
    samples: List[FunctionalSample]
) -> ReportRow:
    """
    Reduce the replicates of one degree to a report row

    Statistics needing more samples than available (Wasserstein >= 30,
    cumulants >= 100, L2 gap >= 30) are left as NaN.
    """
    params = DegreeParams.from_ell(ell)
    n_theta, n_phi = config.grid_policy.planned(ell)
    n = len(samples)
    m = _column(samples, "m")
    h4 = _column(samples, "h4")
    p4 = _column(samples, "proj4")

    mean_m, se_mean_m = _mean_with_se(m)
    row: Dict[str, float] = {
        "ell": ell,
        "replicates": n,
        "n_theta": n_theta,
        "n_phi": n_phi,
        "expected_L": 2.0 * math.pi * params.gradient_scale,
        "mean_M": mean_m,
        "se_mean_M": se_mean_m,
        "var_M": float(m.var(ddof=1)),
        "se_var_M": _jackknife("variance", m),
        "var_M_exact": var_trispectrum_exact(params),
        "corr_proj4_M": sample_correlation(p4, m),
        "se_corr_proj4_M": _jackknife("correlation", p4, m),
        "var_proj4": float(p4.var(ddof=1)),
        "se_var_proj4": _jackknife("variance", p4),
        "level": config.level,
    }
    if ell >= 2:
        row["cov_LM_exact"] = cov_length_trispectrum(params)

    if n >= MIN_WASSERSTEIN_SAMPLES:
        row["d_wasserstein"] = empirical_wasserstein(m)
        row["d_w_noise_floor"] = wasserstein_noise_floor(n)
    if n >= MIN_CUMULANT_SAMPLES:
        row["cum4_M"] = standardized_cumulant(m)
        row["se_cum4_M"] = _jackknife("standardized_cum4", m)
        row["cum4_h4"] = fourth_cumulant(h4)
        row["se_cum4_h4"] = _jackknife("cum4", h4)
        row["stein_bound"] = stein_bound(m)

    if config.nodal:
        lengths = _column(samples, "nodal_length")
        row["mean_L"], row["se_mean_L"] = _mean_with_se(lengths)
        row["var_L"] = float(lengths.var(ddof=1))
        row["se_var_L"] = _jackknife("variance", lengths)
        row["cov_LM"] = float(np.cov(lengths, m, ddof=1)[0, 1])
        row["se_cov_LM"] = _jackknife("covariance", lengths, m)
        row["corr_LM"] = _or_nan(sample_correlation, lengths, m)
        row["se_corr_LM"] = _jackknife("correlation", lengths, m)
        row["corr_L_proj4"] = _or_nan(sample_correlation, lengths, p4)
        row["se_corr_L_proj4"] = _jackknife("correlation", lengths, p4)
        row["var_proj4_over_var_L"] = row["var_proj4"] / row["var_L"] if row["var_L"] > 0 else math.nan
        if n >= MIN_GAP_SAMPLES:
            row["l2_gap"] = _or_nan(l2_gap, lengths, m)
            row["l2_gap_analytic"] = _or_nan(l2_gap, lengths, m, means=(row["expected_L"], 0.0))
        if n >= MIN_WASSERSTEIN_SAMPLES:
            row["d_wasserstein_L"] = _or_nan(empirical_wasserstein, lengths)

    if config.epsilon_band:
        row["mean_L_eps"], row["se_mean_L_eps"] = _mean_with_se(_column(samples, "nodal_length_epsilon"))

    if config.level != 0.0:
        row["expected_level_length"] = boundary_length_chaos(params, config.level).mean
        if config.nodal:
            level_lengths = _column(samples, "level_length")
            proj2 = _column(samples, "proj2")
            row["mean_level_length"], row["se_mean_level_length"] = _mean_with_se(level_lengths)
            row["corr_L_proj2"] = _or_nan(sample_correlation, level_lengths, proj2)
            row["se_corr_L_proj2"] = _jackknife("correlation", level_lengths, proj2)

    return ReportRow(**row)


def build_provenance(config: ExperimentConfig) -> Provenance:
    return Provenance(
        name=config.name,
        version=settings.version,
        master_seed=config.master_seed,
        config=config.model_dump(mode="json"),
        grids={str(ell): list(config.grid_policy.planned(ell)) for ell in config.ells},
        calibration_seed=settings.calibration_seed,
        calibration_repetitions=settings.calibration_repetitions,
    )


def run_campaign(config: ExperimentConfig) -> ExperimentReport:
    """
    Run every degree of a campaign and assemble the report

    The report is a pure function of the configuration: replicate seeds
    derive from (master_seed, replicate, ell) and reductions run in
    replicate order, whatever the thread count.

    Args:
        config: Validated campaign configuration

    Returns:
        ExperimentReport with one row per degree
    """
    logger.info(f"Starting campaign '{config.name}' over degrees {config.ells}")
    rows = []
    for ell in config.ells:
        started = time.perf_counter()
        samples = run_degree(config, ell)
        if len(samples) != config.replicates:
            raise DomainError(f"degree {ell} produced {len(samples)} of {config.replicates} replicates")
        rows.append(summarize_degree(config, ell, samples))
        logger.info(f"Degree {ell} finished in {time.perf_counter() - started:.2f}s")

    report = ExperimentReport(rows=rows, provenance=build_provenance(config))
    logger.info(f"Campaign '{config.name}' complete: {len(rows)} degree(s)")
    return report


def timing_report() -> Dict:
    """Wall-time summary of every replicate recorded so far"""
    return performance_monitor.get_full_report()
