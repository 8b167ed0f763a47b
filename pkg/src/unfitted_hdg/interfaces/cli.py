"""
Command-line entry point: ``unfitted-hdg --config run.yaml``.
"""
import argparse
import logging
import sys
from typing import List, Optional

from ..core.config import configure_logging
from ..core.errors import UnfittedHDGError
from ..core.run_config import load_run_config
from ..core.settings import load_settings
from ..core.solver import UnfittedHDGSolver

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unfitted-hdg",
        description="Unfitted HDG solver for quasilinear elliptic problems on curved domains",
    )
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides the run file and environment)")
    parser.add_argument("--strict", action="store_true", help="exit with status 3 on admissibility failures")
    parser.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    parser.add_argument("--settings", default=None, help="package settings file (default config/settings.yaml)")
    return parser


def run_cli(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, load the run configuration and execute it.

    Args:
        argv: Argument list (defaults to sys.argv[1:])

    Returns:
        Exit status
    """
    args = build_parser().parse_args(argv)
    settings = load_settings(args.settings)
    log_settings = settings.get("logging", {})
    configure_logging(log_settings.get("level", "INFO"), log_settings.get("file"), args.quiet)

    try:
        config = load_run_config(args.config, settings)
        solver = UnfittedHDGSolver(config, out_dir=args.out, strict=args.strict)
    except UnfittedHDGError as e:
        logger.error(f"Could not set up the run: {e}")
        return e.exit_code
    return solver.run()


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
