"""
Error hierarchy for the unfitted HDG solver.

Library code raises these; the orchestrator and the command line translate
them into log records and exit codes.
"""
from typing import Any, Optional


class UnfittedHDGError(Exception):
    """Base class for all solver errors."""

    exit_code = 4


class ConfigurationError(UnfittedHDGError):
    """Run configuration failed to parse or validate."""

    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ExpressionError(ConfigurationError):
    """Expression string outside the supported grammar."""


class BoundaryDefinitionError(ConfigurationError):
    """Boundary curve is not closed, not simple, or has the wrong orientation."""


class NonConvergence(UnfittedHDGError):
    """Nearest-point projection onto the boundary did not converge."""


class NoIntersection(UnfittedHDGError):
    """Transfer ray does not reach the boundary within twice the diameter."""

    def __init__(self, message: str, face_id: Optional[int] = None):
        self.face_id = face_id
        super().__init__(f"face {face_id}: {message}" if face_id is not None else message)


class MeshGenerationError(UnfittedHDGError):
    """Triangulation of the offset polygon lost a boundary edge."""


class QualityFailure(MeshGenerationError):
    """Shape regularity beta exceeds the policy limit."""


class SingularGram(UnfittedHDGError):
    """Gram matrix singular beyond its structural null space."""


class UnsupportedOrder(UnfittedHDGError):
    """Quadrature order or polynomial degree outside the supported range."""


class SingularLocalSolve(UnfittedHDGError):
    """Element-local HDG matrix is singular."""


class PathDegenerate(UnfittedHDGError):
    """Transfer path with negative length."""


class SolverFailure(UnfittedHDGError):
    """Skeleton system could not be factorized or solved accurately."""


class MaxItersExceeded(UnfittedHDGError):
    """Picard iteration hit its iteration limit."""

    def __init__(self, message: str, trace: Any = None):
        self.trace = trace
        super().__init__(message)


class DivergenceDetected(MaxItersExceeded):
    """Picard increments grew tenfold three iterations in a row."""


class SingularProjection(UnfittedHDGError):
    """HDG projector system is singular (zero stabilization)."""


class NonDifferentiable(UnfittedHDGError):
    """Manufactured-solution expression could not be differentiated."""


class ZeroError(UnfittedHDGError):
    """Machine-zero error makes a convergence rate undefined."""


class AdmissibilityFailure(UnfittedHDGError):
    """Mesh violates the admissibility assumptions in strict mode."""

    exit_code = 3


class AcceptanceFailure(UnfittedHDGError):
    """Convergence study rates fell outside the acceptance bands."""

    exit_code = 5
