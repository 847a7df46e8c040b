#!/usr/bin/env python3
"""
Run All Campaigns for NODAL LAB
Validate and execute every campaign document under campaigns/
"""

import sys
import logging
from pathlib import Path
from typing import Dict, Optional

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from pydantic import ValidationError

from core.config_manager import settings
from core.exceptions import NodalLabError
from core.logging_config import configure_logging
from core.performance_monitor import performance_monitor
from experiments.campaign import run_campaign
from experiments.export import write_report
from experiments.models import ExperimentConfig

configure_logging()
logger = logging.getLogger(__name__)


def load_campaign(path: Path) -> Optional[ExperimentConfig]:
    """
    Read and validate one campaign document

    Args:
        path: JSON file

    Returns:
        ExperimentConfig, or None when the document is invalid
    """
    try:
        return ExperimentConfig.model_validate_json(path.read_text(encoding="utf-8"))
    except (OSError, ValidationError) as e:
        logger.error(f"Invalid campaign {path.name}: {str(e)}")
        return None


def execute_campaign(path: Path) -> bool:
    """
    Run one campaign and write its report

    Args:
        path: Campaign JSON file

    Returns:
        True if successful, False otherwise
    """
    logger.info(f"{'=' * 60}")
    logger.info(f"Campaign {path.stem.upper()}")
    logger.info(f"{'=' * 60}")

    config = load_campaign(path)
    if config is None:
        return False

    report_path = config.outputs.report or str(Path(settings.output_dir) / f"{path.stem}.csv")
    performance_monitor.reset()
    try:
        report = run_campaign(config)
    except NodalLabError as e:
        logger.error(f"  ✗ Campaign {path.stem} failed: {str(e)}")
        return False

    record_timing = config.outputs.record_timing
    timing = performance_monitor.get_full_report() if record_timing else None
    write_report(report, report_path, timing=timing)
    logger.info(f"  ✓ {len(report.rows)} degree(s) written to {report_path}")
    return True


def main() -> bool:
    """Run every campaign document in the campaigns directory"""
    campaigns_dir = Path(settings.campaigns_path)
    if len(sys.argv) > 1:
        paths = [Path(arg) for arg in sys.argv[1:]]
    else:
        paths = sorted(campaigns_dir.glob("*.json"))

    if not paths:
        logger.error(f"No campaign documents found in {campaigns_dir}")
        return False

    results: Dict[str, bool] = {path.stem: execute_campaign(path) for path in paths}

    logger.info("=" * 60)
    logger.info("CAMPAIGN SUMMARY")
    logger.info("=" * 60)
    for name, success in results.items():
        if success:
            logger.info(f"✓ {name.upper()}")
        else:
            logger.error(f"✗ {name.upper()}: FAILED")

    failed = [name for name, success in results.items() if not success]
    logger.info(f"Total: {len(results) - len(failed)}/{len(results)} campaigns completed")
    return not failed


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
