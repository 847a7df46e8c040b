"""
Experiment Models for NODAL LAB
Validated campaign configuration, report rows and provenance records
"""

import logging
import math
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.config_manager import settings
from nodal_system.geometry import required_resolution
from nodal_system.specfun import QuadratureGrid, planned_grid_size, spherical_grid

logger = logging.getLogger(__name__)


class GridPolicy(BaseModel):
    """Resolution multipliers for the per-degree quadrature grid"""
    model_config = ConfigDict(extra="forbid")

    theta_mult: float = Field(default_factory=lambda: settings.theta_mult, gt=0, description="Colatitude nodes per unit degree")
    phi_mult: float = Field(default_factory=lambda: settings.phi_mult, gt=0, description="Longitude nodes per unit degree")
    grid_mult: float = Field(default_factory=lambda: settings.grid_mult, gt=0, description="Overall refinement factor")
    min_theta_nodes: int = Field(default_factory=lambda: settings.min_theta_nodes, ge=1, description="Lower bound on colatitude nodes")
    extrapolate: bool = Field(default_factory=lambda: settings.contour_extrapolation, description="Richardson-correct contour lengths")
    allow_under_resolved: bool = Field(False, description="Skip the nodal-geometry resolution floor")

    def planned(self, ell: int) -> Tuple[int, int]:
        """(n_theta, n_phi) for degree ell"""
        return planned_grid_size(ell, self.theta_mult, self.phi_mult, self.grid_mult, self.min_theta_nodes)

    def grid(self, ell: int) -> QuadratureGrid:
        return spherical_grid(*self.planned(ell))

    def floor_violations(self, ells: List[int]) -> List[str]:
        """Degrees whose planned grid misses the geometry floor"""
        problems = []
        for ell in ells:
            n_theta, n_phi = self.planned(ell)
            need_theta, need_phi = required_resolution(ell)
            if n_theta < need_theta or n_phi < need_phi:
                problems.append(
                    f"ell={ell}: planned ({n_theta}, {n_phi}), requires n_theta >= {need_theta}, n_phi >= {need_phi}"
                )
        return problems


class OutputPaths(BaseModel):
    """Where a campaign writes its files"""
    model_config = ConfigDict(extra="forbid")

    report: Optional[str] = Field(None, description="Report CSV path; the JSON sidecar is written next to it")
    record_timing: bool = Field(default_factory=lambda: settings.record_timing, description="Also write <report>.timing.json")


class ExperimentConfig(BaseModel):
    """Monte Carlo campaign configuration"""
    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "name": "equivalence",
                "ells": [8, 16, 32, 64],
                "replicates": 300,
                "master_seed": 20240601,
                "grid_policy": {"grid_mult": 1.0, "extrapolate": True},
                "outputs": {"report": "data/reports/equivalence.csv"}
            }
        }
    )

    name: str = Field("campaign", description="Campaign label used in logs and provenance")
    ells: List[int] = Field(..., min_length=1, description="Degrees to simulate")
    replicates: int = Field(..., ge=2, description="Replicates per degree")
    master_seed: int = Field(default_factory=lambda: settings.default_seed, description="Campaign seed")
    grid_policy: GridPolicy = Field(default_factory=GridPolicy, description="Resolution policy")
    epsilon: float = Field(default_factory=lambda: settings.epsilon, gt=0, description="Epsilon-band half-width")
    level: float = Field(0.0, description="Threshold z of the boundary length (0 is the nodal line)")
    nodal: bool = Field(True, description="Measure the nodal length by contour tracing")
    epsilon_band: bool = Field(False, description="Also measure the epsilon-band length")
    threads: int = Field(default_factory=lambda: settings.threads, ge=1, description="Worker threads over replicates")
    outputs: OutputPaths = Field(default_factory=OutputPaths, description="Output paths")

    @field_validator("ells")
    @classmethod
    def validate_ells(cls, ells: List[int]) -> List[int]:
        bad = [ell for ell in ells if ell < 1]
        if bad:
            raise ValueError(f"all degrees must be >= 1, got {bad}")
        return ells

    @model_validator(mode="after")
    def validate_resolution(self) -> "ExperimentConfig":
        if (self.nodal or self.level != 0.0) and not self.grid_policy.allow_under_resolved:
            problems = self.grid_policy.floor_violations(self.ells)
            if problems:
                raise ValueError("grid policy below the nodal resolution floor: " + "; ".join(problems))
        return self


class ReportRow(BaseModel):
    """Per-degree statistics with their Monte Carlo standard errors (NaN when not measured)"""

    ell: int = Field(..., description="Degree")
    replicates: int = Field(..., description="Replicates aggregated")
    n_theta: int = Field(..., description="Colatitude nodes")
    n_phi: int = Field(..., description="Longitude nodes")

    mean_L: float = Field(math.nan, description="Mean nodal length")
    se_mean_L: float = Field(math.nan, description="Standard error of mean_L")
    expected_L: float = Field(..., description="Analytic mean nodal length 2 pi sqrt(lam/2)")
    var_L: float = Field(math.nan, description="Sample variance of L")
    se_var_L: float = Field(math.nan, description="Jackknife standard error of var_L")
    mean_L_eps: float = Field(math.nan, description="Mean epsilon-band length")
    se_mean_L_eps: float = Field(math.nan, description="Standard error of mean_L_eps")

    mean_M: float = Field(..., description="Mean of M")
    se_mean_M: float = Field(..., description="Standard error of mean_M")
    var_M: float = Field(..., description="Sample variance of M")
    se_var_M: float = Field(..., description="Jackknife standard error of var_M")
    var_M_exact: float = Field(..., description="Deterministic Var{M}")

    cov_LM: float = Field(math.nan, description="Sample covariance of L and M")
    se_cov_LM: float = Field(math.nan, description="Jackknife standard error of cov_LM")
    cov_LM_exact: float = Field(math.nan, description="Deterministic Cov{L, M} (ell >= 2)")
    corr_LM: float = Field(math.nan, description="Sample correlation of L and M")
    se_corr_LM: float = Field(math.nan, description="Jackknife standard error of corr_LM")

    corr_proj4_M: float = Field(..., description="Sample correlation of proj4 and M")
    se_corr_proj4_M: float = Field(..., description="Jackknife standard error of corr_proj4_M")
    corr_L_proj4: float = Field(math.nan, description="Sample correlation of L and proj4")
    se_corr_L_proj4: float = Field(math.nan, description="Jackknife standard error of corr_L_proj4")
    var_proj4: float = Field(..., description="Sample variance of proj4")
    se_var_proj4: float = Field(..., description="Jackknife standard error of var_proj4")
    var_proj4_over_var_L: float = Field(math.nan, description="Share of Var{L} carried by the fourth chaos")

    l2_gap: float = Field(math.nan, description="Mean squared gap of standardized L and M")
    l2_gap_analytic: float = Field(math.nan, description="l2_gap with analytic means")
    d_wasserstein: float = Field(math.nan, description="Wasserstein distance of standardized M to N(0,1)")
    d_wasserstein_L: float = Field(math.nan, description="Wasserstein distance of standardized L to N(0,1)")
    d_w_noise_floor: float = Field(math.nan, description="Mean Gaussian self-distance at this sample size")
    cum4_M: float = Field(math.nan, description="Fourth cumulant of standardized M")
    se_cum4_M: float = Field(math.nan, description="Jackknife standard error of cum4_M")
    cum4_h4: float = Field(math.nan, description="Fourth cumulant of h4")
    se_cum4_h4: float = Field(math.nan, description="Jackknife standard error of cum4_h4")
    stein_bound: float = Field(math.nan, description="sqrt(max(cum4_M, 0)/(2 pi))")

    level: float = Field(0.0, description="Threshold z")
    mean_level_length: float = Field(math.nan, description="Mean level-z boundary length")
    se_mean_level_length: float = Field(math.nan, description="Standard error of mean_level_length")
    expected_level_length: float = Field(math.nan, description="Analytic mean level-z boundary length")
    corr_L_proj2: float = Field(math.nan, description="Correlation of the level-z length with its second chaos")
    se_corr_L_proj2: float = Field(math.nan, description="Jackknife standard error of corr_L_proj2")


class Provenance(BaseModel):
    """Everything needed to reproduce a report"""

    name: str = Field(..., description="Campaign label")
    version: str = Field(..., description="Code version")
    master_seed: int = Field(..., description="Campaign seed")
    config: Dict[str, Any] = Field(..., description="Echo of the validated configuration")
    grids: Dict[str, List[int]] = Field(..., description="Planned (n_theta, n_phi) per degree")
    calibration_seed: int = Field(..., description="Seed of the Wasserstein noise-floor calibration")
    calibration_repetitions: int = Field(..., description="Repetitions of the noise-floor calibration")


class ExperimentReport(BaseModel):
    """One row per degree plus provenance"""

    rows: List[ReportRow] = Field(..., description="Per-degree statistics")
    provenance: Provenance = Field(..., description="Reproduction record")

    def to_frame(self) -> pd.DataFrame:
        columns = list(ReportRow.model_fields)
        return pd.DataFrame([row.model_dump() for row in self.rows], columns=columns)
