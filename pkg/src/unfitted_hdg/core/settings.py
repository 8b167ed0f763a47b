"""
Package defaults loaded from config/settings.yaml.
"""
import copy
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

logger = logging.getLogger(__name__)

SETTINGS_PATH = Path(__file__).resolve().parents[3] / "config" / "settings.yaml"

DEFAULT_SETTINGS: Dict[str, Any] = {
    "app": {"name": "Unfitted HDG Solver", "version": "1.0.0"},
    "logging": {
        "level": "INFO",
        "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        "file": None,
    },
    "mesh": {
        "beta_max": 5.0,
        "gap_fraction": 0.25,
        "c_prox": 1.5,
        "smoothing_sweeps": 3,
        "adaptive_gap": True,
        "min_gap_fraction": 0.01,
    },
    "discretization": {"degree": 1, "tau": 1.0, "tau_boundary": None, "residual_tol": 1e-9},
    "picard": {
        "tol": 1e-10,
        "max_iters": 100,
        "relaxation": 1.0,
        "trace_contraction": True,
        "check_full_residual": False,
    },
    "acceptance": {"finest_band": 0.2, "coarsest_band": 0.5, "size_measure": "target"},
    "output": {"directory": "results", "float_format": "%.17g"},
}


def merge_settings(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_settings(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_settings(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """
    Load package settings, layering the YAML file over built-in defaults.

    Args:
        path: Settings file; defaults to config/settings.yaml in the repository

    Returns:
        Nested settings dictionary
    """
    settings_path = Path(path) if path else SETTINGS_PATH
    if not settings_path.exists():
        logger.debug(f"No settings file at {settings_path}, using built-in defaults")
        return copy.deepcopy(DEFAULT_SETTINGS)
    with open(settings_path, "r", encoding="utf-8") as f:
        loaded = yaml.safe_load(f) or {}
    return merge_settings(DEFAULT_SETTINGS, loaded)
