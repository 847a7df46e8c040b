"""
Command-Line Application for NODAL LAB
Argument parsing, logging setup and the exception to exit-code mapping
"""

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from cli import commands
from core.config_manager import settings
from core.exceptions import DomainError, NodalLabError, UsageError
from core.logging_config import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN_ERROR = 1
EXIT_USAGE_ERROR = 2


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonnegative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--grid-mult", type=_positive_float, default=settings.grid_mult,
                        help="Refinement factor of the default grid policy")
    parser.add_argument("--threads", type=_positive_int, default=settings.threads,
                        help="Worker threads")
    parser.add_argument("--out", default=None, help="Output CSV path (a .meta.json sidecar is written next to it)")
    parser.add_argument("--dry-run", action="store_true",
                        help="Validate resolution floors and print planned grid sizes without computing")


def _single_field(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ell", type=_nonnegative_int, required=True, help="Degree")
    parser.add_argument("--seed", type=int, default=settings.default_seed, help="Master seed")
    parser.add_argument("--replicate", type=_nonnegative_int, default=0, help="Replicate index")


def _campaign_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="ExperimentConfig JSON document")
    parser.add_argument("--ells", default=None, help="Comma-separated degrees, e.g. 8,16,32")
    parser.add_argument("--replicates", type=int, default=100, help="Replicates per degree")
    parser.add_argument("--seed", type=int, default=settings.default_seed, help="Master seed")
    parser.add_argument("--epsilon", type=_positive_float, default=settings.epsilon, help="Epsilon-band half-width")
    parser.add_argument("--epsilon-band", action="store_true", help="Also measure the epsilon-band length")
    parser.add_argument("--level", type=float, default=0.0, help="Threshold z of the boundary length")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nodal-lab",
        description="Random spherical harmonics: nodal lengths, trispectrum and chaos projections",
    )
    parser.add_argument("--log-level", default=settings.log_level, help="Log level (DEBUG, INFO, ...)")
    parser.add_argument("--log-format", choices=["text", "json"], default=settings.log_format,
                        help="Log record format on stderr")
    subparsers = parser.add_subparsers(dest="command", required=True)

    sample = subparsers.add_parser("sample", help="Draw one field; --out dumps f and its gradient on the grid")
    _single_field(sample)
    _common(sample)
    sample.set_defaults(handler=commands.cmd_sample)

    nodal = subparsers.add_parser("nodal", help="Nodal (or level-z) length of one field")
    _single_field(nodal)
    nodal.add_argument("--level", type=float, default=0.0, help="Threshold z")
    nodal.add_argument("--epsilon", type=_positive_float, default=None,
                       help="Also report the epsilon-band length with this half-width")
    _common(nodal)
    nodal.set_defaults(handler=commands.cmd_nodal)

    trispectrum = subparsers.add_parser("trispectrum", help="h4, M and proj4 for consecutive replicates")
    _single_field(trispectrum)
    trispectrum.add_argument("--replicates", type=_positive_int, default=1, help="Number of replicates")
    _common(trispectrum)
    trispectrum.set_defaults(handler=commands.cmd_trispectrum)

    cross = subparsers.add_parser("cross-corr", help="Exact and asymptotic cross-correlation profile")
    cross.add_argument("--ell", type=_positive_int, required=True, help="Degree")
    cross.add_argument("--psi-min", type=_positive_float, default=10.0, help="Smallest scaled angle")
    cross.add_argument("--psi-max", type=_positive_float, default=None, help="Largest scaled angle (default L pi/2)")
    cross.add_argument("--steps", type=int, default=500, help="Number of equispaced angles")
    _common(cross)
    cross.set_defaults(handler=commands.cmd_cross_corr)

    scan = subparsers.add_parser("variance-scan", help="Deterministic Var{M} and Cov{L, M} across degrees")
    scan.add_argument("--ells", required=True, help="Comma-separated degrees >= 2")
    _common(scan)
    scan.set_defaults(handler=commands.cmd_variance_scan)

    clt = subparsers.add_parser("clt", help="Wasserstein distance and cumulants of M")
    _campaign_flags(clt)
    _common(clt)
    clt.set_defaults(handler=commands.cmd_clt)

    campaign = subparsers.add_parser("campaign", help="Full Monte Carlo campaign")
    _campaign_flags(campaign)
    _common(campaign)
    campaign.set_defaults(handler=commands.cmd_campaign)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse, dispatch and map failures to exit codes

    Returns:
        0 on success, 1 on a domain error, 2 on a usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE_ERROR

    configure_logging(args.log_level, args.log_format)
    try:
        return args.handler(args)
    except UsageError as e:
        logger.error(f"Usage error: {e}")
        return EXIT_USAGE_ERROR
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE_ERROR
    except DomainError as e:
        logger.error(f"Domain error: {e}")
        return EXIT_DOMAIN_ERROR
    except NodalLabError as e:
        logger.error(f"Error: {e}")
        return EXIT_DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())
