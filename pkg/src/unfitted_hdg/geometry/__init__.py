"""
Physical boundaries and expression parsing.
"""
from .boundary import (
    AnchorBatch,
    AnchorResult,
    BoundaryKind,
    DomainBoundary,
    anchor_point,
    anchor_points,
    boundary_from_config,
    circle,
    ellipse,
    kite,
    level_set,
    parametric_curve,
    signed_distance,
)
from .expressions import CompiledExpression, compile_expression, parse_expression, symbols, vectorize

__all__ = [
    "AnchorBatch",
    "AnchorResult",
    "BoundaryKind",
    "CompiledExpression",
    "DomainBoundary",
    "anchor_point",
    "anchor_points",
    "boundary_from_config",
    "circle",
    "compile_expression",
    "ellipse",
    "kite",
    "level_set",
    "parametric_curve",
    "parse_expression",
    "signed_distance",
    "symbols",
    "vectorize",
]
