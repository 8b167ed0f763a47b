"""
Core modules for the unfitted HDG solver: configuration, errors and
problem data. The run orchestrator lives in core.solver.
"""

from .config import Config, configure_logging
from .errors import (
    AcceptanceFailure,
    AdmissibilityFailure,
    ConfigurationError,
    MaxItersExceeded,
    UnfittedHDGError,
)
from .problem import KappaVariant, LipschitzConstants, ProblemSpec
from .run_config import RunConfig, load_run_config, parse_run_config
from .settings import load_settings

__all__ = [
    "AcceptanceFailure",
    "AdmissibilityFailure",
    "Config",
    "ConfigurationError",
    "KappaVariant",
    "LipschitzConstants",
    "MaxItersExceeded",
    "ProblemSpec",
    "RunConfig",
    "UnfittedHDGError",
    "configure_logging",
    "load_run_config",
    "load_settings",
    "parse_run_config",
]
