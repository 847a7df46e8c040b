"""
Report Export for NODAL LAB
CSV tables through pandas and JSON sidecars for provenance and timing
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import pandas as pd

from experiments.models import ExperimentReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def frame_to_csv(frame: pd.DataFrame) -> str:
    """CSV text with a header row and no index"""
    return frame.to_csv(index=False, lineterminator="\n")


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(frame_to_csv(frame), encoding="utf-8")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def sidecar_path(path: PathLike, suffix: str = "meta") -> Path:
    """<out>.meta.json (or <out>.<suffix>.json) next to a data file"""
    path = Path(path)
    return path.with_name(f"{path.name}.{suffix}.json")


def write_json(payload: Dict[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def write_with_sidecar(
    frame: pd.DataFrame,
    path: PathLike,
    provenance: Dict[str, Any]
) -> Path:
    """
    Write a CSV and its provenance sidecar

    Args:
        frame: Table to write
        path: CSV path
        provenance: JSON-serializable record (config echo, seed, version)

    Returns:
        Path of the CSV
    """
    csv_path = write_csv(frame, path)
    write_json(provenance, sidecar_path(csv_path))
    return csv_path


def write_report(
    report: ExperimentReport,
    path: PathLike,
    timing: Optional[Dict[str, Any]] = None
) -> Path:
    """
    Write a campaign report: CSV, <out>.meta.json and, when timing is
    given, <out>.timing.json

    Timing never enters the CSV or the provenance sidecar.
    """
    csv_path = write_with_sidecar(report.to_frame(), path, report.provenance.model_dump(mode="json"))
    if timing is not None:
        write_json(timing, sidecar_path(csv_path, "timing"))
    return csv_path
