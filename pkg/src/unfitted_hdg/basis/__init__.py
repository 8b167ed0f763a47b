"""
Polynomial spaces, quadrature and extrapolation.
"""

from .polynomials import (
    ElementBasis,
    ElementBasisSet,
    FaceBasis,
    dimension,
    extrapolate,
    face_basis_values,
    monomial_exponents,
)
from .quadrature import Domain, quadrature, segment_points, triangle_points

__all__ = [
    "Domain",
    "ElementBasis",
    "ElementBasisSet",
    "FaceBasis",
    "dimension",
    "extrapolate",
    "face_basis_values",
    "monomial_exponents",
    "quadrature",
    "segment_points",
    "triangle_points",
]
