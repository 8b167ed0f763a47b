"""
HDG projection and face L2 projection.
"""
from .hdg_projector import (
    ProjectedPair,
    face_basis_for,
    face_l2_project,
    face_projector_coefficients,
    hdg_project,
    project_fields,
    project_sigma,
    projection_residuals,
)

__all__ = [
    "ProjectedPair",
    "face_basis_for",
    "face_l2_project",
    "face_projector_coefficients",
    "hdg_project",
    "project_fields",
    "project_sigma",
    "projection_residuals",
]
