"""
Computational meshes, transfer paths and admissibility checks.
"""
from .admissibility import (
    AdmissibilityReport,
    CoverageReport,
    FaceAdmissibility,
    FittedMesh,
    admissible_gap_bound,
    build_mesh_for_degree,
    check_admissibility,
    estimate_face_constants,
    patch_coverage,
)
from .generator import MeshPolicy, build_admissible_mesh
from .mesh_io import MeshFile, read_mesh, write_mesh
from .transfer import TransferData, build_transfer_data
from .triangulation import Face, FaceKind, Triangulation

__all__ = [
    "AdmissibilityReport",
    "CoverageReport",
    "Face",
    "FaceAdmissibility",
    "FaceKind",
    "FittedMesh",
    "MeshFile",
    "MeshPolicy",
    "TransferData",
    "Triangulation",
    "admissible_gap_bound",
    "build_admissible_mesh",
    "build_mesh_for_degree",
    "build_transfer_data",
    "check_admissibility",
    "estimate_face_constants",
    "patch_coverage",
    "read_mesh",
    "write_mesh",
]
