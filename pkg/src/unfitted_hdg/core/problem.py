"""
Problem description for -div(kappa grad u) = f(u) with transferred Dirichlet data.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional

import numpy as np

from .errors import ConfigurationError


class KappaVariant(Enum):
    """How the diffusivity depends on the solution."""

    OF_U = "of-u"
    OF_GRAD = "of-grad"


@dataclass(frozen=True)
class LipschitzConstants:
    """Lipschitz metadata of the source and the diffusivity (all optional)."""

    L_f: Optional[float] = None
    L: Optional[float] = None
    L_hat: Optional[float] = None
    L_tilde: Optional[float] = None

    def to_dict(self) -> Dict[str, Optional[float]]:
        return {"L_f": self.L_f, "L": self.L, "L_hat": self.L_hat, "L_tilde": self.L_tilde}


@dataclass(frozen=True)
class ProblemSpec:
    """
    Quasilinear elliptic problem data.

    kappa takes u values for the of-u variant and (sx, sy) gradient
    components for the of-grad variant. source takes (x, y, u) and g takes
    (x, y); all callables are vectorized over numpy arrays.
    """

    kappa_variant: KappaVariant
    kappa: Callable[..., np.ndarray]
    kappa_lo: float
    kappa_hi: float
    source: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    degree: int
    tau: float = 1.0
    tau_boundary: Optional[float] = None
    lipschitz: LipschitzConstants = field(default_factory=LipschitzConstants)

    def __post_init__(self) -> None:
        if not (0 < self.kappa_lo <= self.kappa_hi):
            raise ConfigurationError("kappa bounds must satisfy 0 < kappa_lo <= kappa_hi", "problem.kappa")
        if not 0 <= self.degree <= 3:
            raise ConfigurationError("polynomial degree must lie in [0, 3]", "k")
        if self.tau <= 0 or (self.tau_boundary is not None and self.tau_boundary <= 0):
            raise ConfigurationError("stabilization must be positive", "tau")

    @property
    def tau_bar(self) -> float:
        """Largest stabilization value in use."""
        return max(self.tau, self.tau_boundary if self.tau_boundary is not None else self.tau)

    def describe(self) -> Dict[str, Any]:
        return {
            "kappa_variant": self.kappa_variant.value,
            "kappa_lo": self.kappa_lo,
            "kappa_hi": self.kappa_hi,
            "degree": self.degree,
            "tau": self.tau,
            "tau_boundary": self.tau_boundary,
            "lipschitz": self.lipschitz.to_dict(),
        }
