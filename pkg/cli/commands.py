"""
CLI Commands for NODAL LAB
One handler per subcommand; every handler echoes its numeric output as CSV
on stdout and returns a process exit code
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from core.config_manager import settings
from core.exceptions import UsageError
from experiments.campaign import run_campaign, timing_report
from experiments.export import frame_to_csv, write_report, write_with_sidecar
from experiments.models import ExperimentConfig, GridPolicy, OutputPaths
from nodal_system.analytics import cross_corr_profile, variance_table
from nodal_system.field import sample_coefficients, synthesize
from nodal_system.functionals import m_ell, proj4, sample_trispectrum
from nodal_system.geometry import (
    nodal_length_contour,
    nodal_length_epsilon,
    segments_frame,
    trace_segments,
)
from nodal_system.specfun import DegreeParams

logger = logging.getLogger(__name__)

CLT_COLUMNS = [
    "ell", "replicates", "mean_M", "var_M", "var_M_exact", "d_wasserstein",
    "d_w_noise_floor", "cum4_M", "se_cum4_M", "cum4_h4", "se_cum4_h4", "stein_bound",
]


def echo(frame: pd.DataFrame) -> None:
    sys.stdout.write(frame_to_csv(frame))
    sys.stdout.flush()


def grid_policy(args: argparse.Namespace) -> GridPolicy:
    return GridPolicy(grid_mult=args.grid_mult)


def provenance(command: str, args: argparse.Namespace, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Sidecar record: the invocation's flags, seed and code version"""
    flags = {
        key: value for key, value in sorted(vars(args).items())
        if key not in ("handler", "out", "log_format", "log_level")
    }
    record = {"command": command, "flags": flags, "version": settings.version}
    if extra:
        record.update(extra)
    return record


def parse_ells(text: str) -> List[int]:
    try:
        ells = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"--ells expects comma-separated integers, got '{text}'")
    if not ells:
        raise UsageError("--ells expects at least one degree")
    return ells


def dry_run(ells: List[int], policy: GridPolicy, needs_geometry: bool = True) -> int:
    """Print planned grid sizes; exit 1 when a geometry floor would be violated"""
    rows = []
    for ell in ells:
        n_theta, n_phi = policy.planned(ell)
        rows.append({
            "ell": ell,
            "n_theta": n_theta,
            "n_phi": n_phi,
            "exact_degree": min(2 * n_theta - 1, n_phi - 1),
        })
    echo(pd.DataFrame(rows))

    problems = policy.floor_violations(ells) if needs_geometry else []
    for problem in problems:
        logger.error(f"Resolution floor violated: {problem}")
    return 1 if problems else 0


def cmd_sample(args: argparse.Namespace) -> int:
    """Synthesize one replicate; dump the field grid to --out and echo the coefficients"""
    policy = grid_policy(args)
    if args.dry_run:
        return dry_run([args.ell], policy, needs_geometry=False)

    params = DegreeParams.from_ell(args.ell)
    coeffs = sample_coefficients(params, args.seed, args.replicate)
    if args.out:
        field = synthesize(coeffs, policy.grid(args.ell), workers=args.threads)
        write_with_sidecar(field.to_frame(), args.out, provenance("sample", args, field.grid.describe()))

    echo(pd.DataFrame({
        "m": np.arange(-params.ell, params.ell + 1),
        "a": coeffs.a,
    }))
    return 0


def cmd_nodal(args: argparse.Namespace) -> int:
    """Nodal (or level-z) length of one replicate"""
    policy = grid_policy(args)
    if args.dry_run:
        return dry_run([args.ell], policy)

    params = DegreeParams.from_ell(args.ell)
    grid = policy.grid(args.ell)
    field = synthesize(sample_coefficients(params, args.seed, args.replicate), grid, workers=args.threads)

    estimates = [nodal_length_contour(field, level=args.level, extrapolate=policy.extrapolate)]
    if args.epsilon is not None:
        estimates.append(nodal_length_epsilon(field, args.epsilon, level=args.level, workers=args.threads))

    if args.out:
        segments = segments_frame(trace_segments(field, level=args.level))
        write_with_sidecar(segments, args.out, provenance("nodal", args, grid.describe()))

    echo(pd.DataFrame([
        {
            "ell": e.ell,
            "seed": args.seed,
            "replicate": args.replicate,
            "level": e.level,
            "method": e.method,
            "epsilon": math.nan if e.epsilon is None else e.epsilon,
            "length": e.length,
            "n_theta": e.resolution[0],
            "n_phi": e.resolution[1],
        }
        for e in estimates
    ]))
    return 0


def cmd_trispectrum(args: argparse.Namespace) -> int:
    """h4, M and the fourth-chaos projection for a run of replicates"""
    policy = grid_policy(args)
    if args.dry_run:
        return dry_run([args.ell], policy, needs_geometry=False)

    params = DegreeParams.from_ell(args.ell)
    grid = policy.grid(args.ell)
    rows = []
    for replicate in range(args.replicate, args.replicate + args.replicates):
        field = synthesize(sample_coefficients(params, args.seed, replicate), grid, workers=args.threads)
        h4 = sample_trispectrum(field)
        rows.append({
            "ell": params.ell,
            "seed": args.seed,
            "replicate": replicate,
            "h4": h4,
            "m": m_ell(h4, params),
            "proj4": proj4(field),
        })

    frame = pd.DataFrame(rows)
    if args.out:
        write_with_sidecar(frame, args.out, provenance("trispectrum", args, grid.describe()))
    echo(frame)
    return 0


def cmd_cross_corr(args: argparse.Namespace) -> int:
    """Exact and asymptotic cross-correlation profile"""
    params = DegreeParams.from_ell(args.ell)
    psi_max = args.psi_max if args.psi_max is not None else params.big_l * math.pi / 2.0
    if args.steps < 2:
        raise UsageError(f"--steps must be at least 2, got {args.steps}")
    if not args.psi_min < psi_max:
        raise UsageError(f"--psi-min ({args.psi_min}) must be below --psi-max ({psi_max})")
    if args.dry_run:
        echo(pd.DataFrame([{"ell": params.ell, "psi_min": args.psi_min, "psi_max": psi_max, "steps": args.steps}]))
        return 0

    frame = cross_corr_profile(params, np.linspace(args.psi_min, psi_max, args.steps)).to_frame()
    if args.out:
        write_with_sidecar(frame, args.out, provenance("cross-corr", args, {"ell": params.ell}))
    echo(frame)
    return 0


def cmd_variance_scan(args: argparse.Namespace) -> int:
    """Deterministic Var{M} and Cov{L, M} across degrees"""
    ells = parse_ells(args.ells)
    if args.dry_run:
        echo(pd.DataFrame({"ell": ells}))
        return 0

    frame = variance_table(ells)
    if args.out:
        write_with_sidecar(frame, args.out, provenance("variance-scan", args))
    echo(frame)
    return 0


def _config_from_flags(args: argparse.Namespace, nodal: bool) -> ExperimentConfig:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"--config file not found: {path}")
        config = ExperimentConfig.model_validate_json(path.read_text(encoding="utf-8"))
        updates: Dict[str, Any] = {}
        if args.threads != settings.threads:
            updates["threads"] = args.threads
        if args.out:
            updates["outputs"] = OutputPaths(report=args.out, record_timing=config.outputs.record_timing)
        return ExperimentConfig.model_validate({**config.model_dump(), **updates})

    if not args.ells:
        raise UsageError("--ells (or --config) is required")
    return ExperimentConfig(
        name=args.command,
        ells=parse_ells(args.ells),
        replicates=args.replicates,
        master_seed=args.seed,
        grid_policy=grid_policy(args),
        epsilon=args.epsilon,
        level=args.level,
        nodal=nodal,
        epsilon_band=args.epsilon_band,
        threads=args.threads,
        outputs=OutputPaths(report=args.out),
    )


def _run_and_write(config: ExperimentConfig) -> pd.DataFrame:
    report = run_campaign(config)
    if config.outputs.report:
        timing = timing_report() if config.outputs.record_timing else None
        write_report(report, config.outputs.report, timing=timing)
    return report.to_frame()


def cmd_clt(args: argparse.Namespace) -> int:
    """CLT diagnostics of M: Wasserstein distance, noise floor, cumulants"""
    config = _config_from_flags(args, nodal=False)
    if args.dry_run:
        return dry_run(config.ells, config.grid_policy, needs_geometry=False)
    echo(_run_and_write(config)[CLT_COLUMNS])
    return 0


def cmd_campaign(args: argparse.Namespace) -> int:
    """Full Monte Carlo campaign from --config or flags"""
    config = _config_from_flags(args, nodal=True)
    if args.dry_run:
        return dry_run(config.ells, config.grid_policy, needs_geometry=config.nodal)
    echo(_run_and_write(config))
    return 0
