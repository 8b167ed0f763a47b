"""
Unfitted HDG - Main Package

Hybridizable discontinuous Galerkin solver for quasilinear elliptic problems
on curved two-dimensional domains, using a polygonal computational mesh and
transfer paths to carry the boundary data across the gap.
"""

__version__ = "1.0.0"
__author__ = "Unfitted HDG Team"

from .core.config import Config
from .core.problem import KappaVariant, ProblemSpec
from .core.run_config import RunConfig, load_run_config
from .core.solver import UnfittedHDGSolver
from .geometry.boundary import DomainBoundary, boundary_from_config
from .verification.manufactured import make_manufactured

__all__ = [
    "Config",
    "DomainBoundary",
    "KappaVariant",
    "ProblemSpec",
    "RunConfig",
    "UnfittedHDGSolver",
    "boundary_from_config",
    "load_run_config",
    "make_manufactured",
]
