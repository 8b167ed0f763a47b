"""
Per-run configuration: a YAML file validated by pydantic models.

Sections omitted from the run file fall back to the package settings
(config/settings.yaml). Validation errors surface as ConfigurationError
naming the dotted path of the offending field.
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, ValidationError, model_validator

from .errors import ConfigurationError
from .settings import load_settings, merge_settings

logger = logging.getLogger(__name__)

Subcommand = Literal["solve", "study", "check-mesh", "project-test"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BoundaryConfig(_Section):
    """Physical boundary: a catalog curve or a user curve."""

    kind: Literal["circle", "ellipse", "kite", "parametric", "level-set"]
    center: Tuple[float, float] = (0.0, 0.0)
    radius: PositiveFloat = 1.0
    a: PositiveFloat = 1.0
    b: PositiveFloat = 0.5
    scale: PositiveFloat = 1.0
    x: Optional[str] = None
    y: Optional[str] = None
    expression: Optional[str] = None
    interior_point: Optional[Tuple[float, float]] = None

    @model_validator(mode="after")
    def _curve_fields(self) -> "BoundaryConfig":
        if self.kind == "parametric" and not (self.x and self.y):
            raise ValueError("parametric boundaries need both 'x' and 'y' expressions")
        if self.kind == "level-set" and not self.expression:
            raise ValueError("level-set boundaries need an 'expression'")
        return self


class LipschitzConfig(_Section):
    L_f: Optional[float] = Field(None, ge=0)
    L: Optional[float] = Field(None, ge=0)
    L_hat: Optional[float] = Field(None, ge=0)
    L_tilde: Optional[float] = Field(None, ge=0)


class ProblemConfig(_Section):
    """
    Coefficients and data. With u_exact the source compensation and g are
    manufactured; otherwise g (and optionally source f(x, y, u)) are given.
    """

    kappa_variant: Literal["of-u", "of-grad"] = "of-u"
    kappa: str = "1"
    kappa_lo: PositiveFloat = 1.0
    kappa_hi: PositiveFloat = 1.0
    f0: str = "0"
    u_exact: Optional[str] = None
    source: Optional[str] = None
    g: Optional[str] = None
    lipschitz: LipschitzConfig = Field(default_factory=LipschitzConfig)

    @model_validator(mode="after")
    def _data(self) -> "ProblemConfig":
        if self.kappa_lo > self.kappa_hi:
            raise ValueError("kappa_lo must not exceed kappa_hi")
        if self.u_exact is None and self.g is None:
            raise ValueError("either 'u_exact' or boundary data 'g' is required")
        return self

    @property
    def manufactured(self) -> bool:
        return self.u_exact is not None


class MeshConfig(_Section):
    """Mesh sizes (explicit list or base size plus halvings) and policy."""

    h: Optional[List[PositiveFloat]] = None
    base_h: Optional[PositiveFloat] = None
    halvings: int = Field(0, ge=0)
    beta_max: float = Field(5.0, gt=1.0)
    gap_fraction: float = Field(0.25, ge=0.0, lt=1.0)
    c_prox: PositiveFloat = 1.5
    smoothing_sweeps: int = Field(3, ge=0)
    adaptive_gap: bool = True
    min_gap_fraction: float = Field(0.01, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _sizes(self) -> "MeshConfig":
        if self.h is None and self.base_h is None:
            raise ValueError("give either 'h' or 'base_h'")
        sizes = self.sizes()
        if any(b >= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("mesh sizes must be strictly decreasing")
        return self

    def sizes(self) -> List[float]:
        if self.h is not None:
            return [float(h) for h in self.h]
        return [float(self.base_h) / 2 ** i for i in range(self.halvings + 1)]

    def policy_dict(self) -> Dict[str, Any]:
        return {
            "beta_max": self.beta_max,
            "gap_fraction": self.gap_fraction,
            "c_prox": self.c_prox,
            "smoothing_sweeps": self.smoothing_sweeps,
            "adaptive_gap": self.adaptive_gap,
            "min_gap_fraction": self.min_gap_fraction,
        }


class PicardConfig(_Section):
    tol: PositiveFloat = 1e-10
    max_iters: int = Field(100, ge=1)
    relaxation: float = Field(1.0, gt=0.0, le=1.0)
    trace_contraction: bool = True
    check_full_residual: bool = False


class AcceptanceConfig(_Section):
    finest_band: PositiveFloat = 0.2
    coarsest_band: PositiveFloat = 0.5
    size_measure: Literal["target", "max"] = "target"
    norms: Optional[List[str]] = None
    max_workers: int = Field(1, ge=1)


class OutputConfig(_Section):
    directory: str = "results"
    float_format: str = "%.17g"
    export_mesh: bool = False
    export_skeleton: bool = False


class ProjectTestConfig(_Section):
    elements: int = Field(100, ge=1)
    fields: int = Field(1, ge=1)


class RunConfig(_Section):
    """A complete run."""

    subcommand: Subcommand = "solve"
    k: int = Field(1, ge=0, le=3)
    tau: PositiveFloat = 1.0
    tau_boundary: Optional[PositiveFloat] = None
    residual_tol: PositiveFloat = 1e-9
    seed: int = 0
    boundary: BoundaryConfig
    problem: ProblemConfig
    mesh: MeshConfig
    picard: PicardConfig = Field(default_factory=PicardConfig)
    acceptance: AcceptanceConfig = Field(default_factory=AcceptanceConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    project_test: ProjectTestConfig = Field(default_factory=ProjectTestConfig)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON dump."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _field_path(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error.get("loc", ())) or "config"


def _with_defaults(data: Dict[str, Any], settings: Dict[str, Any]) -> Dict[str, Any]:
    discretization = settings.get("discretization", {})
    defaults: Dict[str, Any] = {
        "k": discretization.get("degree", 1),
        "tau": discretization.get("tau", 1.0),
        "tau_boundary": discretization.get("tau_boundary"),
        "residual_tol": discretization.get("residual_tol", 1e-9),
        "mesh": dict(settings.get("mesh", {})),
        "picard": dict(settings.get("picard", {})),
        "acceptance": dict(settings.get("acceptance", {})),
        "output": dict(settings.get("output", {})),
    }
    return merge_settings(defaults, data)


def parse_run_config(data: Any, settings: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Validate a run description.

    Args:
        data: Parsed YAML mapping
        settings: Package settings supplying defaults

    Returns:
        RunConfig

    Raises:
        ConfigurationError: Naming the first offending field
    """
    if not isinstance(data, dict):
        raise ConfigurationError("run configuration must be a mapping", "config")
    merged = _with_defaults(data, settings if settings is not None else load_settings())
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigurationError(first.get("msg", str(e)), _field_path(first)) from e


def load_run_config(path: Union[str, Path], settings: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Read and validate a YAML run file."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"no such file: {path}", "config")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigurationError(f"invalid YAML: {e}", "config") from e
    config = parse_run_config(data, settings)
    logger.info(f"Loaded run configuration {path} ({config.subcommand}, k={config.k})")
    return config
