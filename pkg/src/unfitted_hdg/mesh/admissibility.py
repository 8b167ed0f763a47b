"""
Admissibility checks for a computational mesh and its extension patches.

Per boundary face the checker estimates the extrapolation constant C_ext
and the inverse-inequality constant C_inv from small generalized
eigenproblems, then evaluates

    S3:  H_perp <= kappa_lo / (3 tau_bar)
    S4:  (kappa_hi / kappa_lo) r_e^3 (C_ext C_inv)^2 <= 1

Failures are reported, never raised. build_mesh_for_degree regenerates a
mesh with a smaller inward gap until the report passes at the run degree.
"""
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.linalg import eigh

from ..basis.polynomials import ElementBasis, ElementBasisSet
from ..basis.quadrature import Domain, quadrature, triangle_points
from ..core.errors import SingularGram
from ..geometry.boundary import DomainBoundary, anchor_points
from .generator import MeshPolicy, build_admissible_mesh
from .transfer import TransferData, build_transfer_data
from .triangulation import Triangulation

logger = logging.getLogger(__name__)

RIDGE = 1e-14
DEFLATION_TOL = 1e-12
MAX_GAP_ATTEMPTS = 12
GAP_SAFETY = 0.8
MIN_GAP_SHRINK = 0.1
MAX_GAP_SHRINK = 0.7


def _normal_trace_values(element: ElementBasis, points: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Values of {phi_i n_x, phi_i n_y} at points (N, 2); returns (N, 2 dim)."""
    phi = element.eval_basis(points)
    return np.concatenate([phi * normal[0], phi * normal[1]], axis=1)


def _normal_derivative_values(element: ElementBasis, points: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """grad(p . n) . n for the same functions; returns (N, 2 dim)."""
    dn = element.grad_basis(points) @ normal
    return np.concatenate([dn * normal[0], dn * normal[1]], axis=1)


def estimate_face_constants(transfer: TransferData, element: ElementBasis, k: int) -> Tuple[float, float]:
    """
    Estimate C_ext and C_inv for one boundary face.

    The normal-trace functions p . n_e over [P_k]^2 have a structural null
    space; it is deflated from the interior Gram matrix before the
    generalized eigenproblems are solved.

    Args:
        transfer: Transfer data of the face
        element: Basis of the face's element T^e
        k: Polynomial degree

    Returns:
        (C_ext, C_inv); C_ext is 0 on faces with r_e = 0 and C_inv is 0 for k = 0

    Raises:
        SingularGram: If the interior Gram matrix has rank below dim P_k
    """
    order = 2 * k + 2
    normal = transfer.normal
    pts, wts = triangle_points(element.vertices[None], order)
    values = _normal_trace_values(element, pts[0], normal)
    m_in = np.einsum("q,qi,qj->ij", wts[0], values, values)

    evals, evecs = np.linalg.eigh(m_in)
    keep = evals > DEFLATION_TOL * evals.max()
    if int(keep.sum()) < element.dim:
        raise SingularGram(f"interior Gram matrix of face {transfer.face} has rank {int(keep.sum())} < {element.dim}")
    basis = evecs[:, keep]
    m_in_r = np.diag(evals[keep])
    m_in_r += RIDGE * np.trace(m_in_r) * np.eye(len(m_in_r))

    r_e = transfer.r_e
    c_ext = 0.0
    if r_e > 0:
        patch_pts, patch_wts = transfer.patch_quadrature(order)
        ext_values = _normal_trace_values(element, patch_pts.reshape(-1, 2), normal)
        m_ext = np.einsum("q,qi,qj->ij", patch_wts.ravel(), ext_values, ext_values)
        lam = eigh(basis.T @ m_ext @ basis, m_in_r, eigvals_only=True)
        c_ext = float(np.sqrt(max(lam.max(), 0.0) / r_e))

    c_inv = 0.0
    if k > 0:
        grads = _normal_derivative_values(element, pts[0], normal)
        k_in = np.einsum("q,qi,qj->ij", wts[0], grads, grads)
        mu = eigh(basis.T @ k_in @ basis, m_in_r, eigvals_only=True)
        c_inv = float(transfer.h_perp * np.sqrt(max(mu.max(), 0.0)))
    return c_ext, c_inv


def admissible_gap_bound(
    h_perp: float, c_ext: float, c_inv: float, kappa_lo: float, kappa_hi: float, tau_bar: float
) -> float:
    """Largest H_perp allowed by S3 and S4 at the given face constants."""
    s3 = kappa_lo / (3.0 * tau_bar)
    product = c_ext * c_inv
    if product == 0:
        return s3
    s4 = h_perp * (kappa_lo / kappa_hi) ** (1.0 / 3.0) * product ** (-2.0 / 3.0)
    return min(s3, s4)


@dataclass(frozen=True)
class FaceAdmissibility:
    """Admissibility record of one boundary face."""

    face: int
    r_e: float
    C_ext: float
    C_inv: float
    S3_ok: bool
    S4_ok: bool
    S3_margin: float
    S4_margin: float
    H_perp: float
    h_perp: float
    d_loc: float
    d_loc_ok: bool
    reentry: bool
    C1_ratio: float
    H_admissible: float

    @property
    def ok(self) -> bool:
        return self.S3_ok and self.S4_ok and self.d_loc_ok


@dataclass(frozen=True)
class AdmissibilityReport:
    """Mesh-level admissibility summary; overall_ok excludes the re-entry flags."""

    beta: float
    R: float
    h: float
    k: int
    kappa_lo: float
    kappa_hi: float
    tau_bar: float
    per_face: List[FaceAdmissibility] = field(default_factory=list)

    @property
    def overall_ok(self) -> bool:
        return all(f.ok for f in self.per_face)

    @property
    def failing_faces(self) -> List[int]:
        return [f.face for f in self.per_face if not f.ok]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "beta": self.beta,
            "R": self.R,
            "h": self.h,
            "k": self.k,
            "kappa_lo": self.kappa_lo,
            "kappa_hi": self.kappa_hi,
            "tau_bar": self.tau_bar,
            "overall_ok": self.overall_ok,
            "reentry_faces": [f.face for f in self.per_face if f.reentry],
            "per_face": [asdict(f) for f in self.per_face],
        }

    def to_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path


def check_admissibility(
    mesh: Triangulation,
    boundary: DomainBoundary,
    kappa_lo: float,
    kappa_hi: float,
    tau_bar: float,
    k: int,
    transfer: Optional[Dict[int, TransferData]] = None,
    policy: Optional[MeshPolicy] = None,
) -> AdmissibilityReport:
    """
    Evaluate S3, S4 and the local proximity condition on every boundary face.

    Args:
        mesh: Computational mesh
        boundary: Physical boundary
        kappa_lo: Lower diffusivity bound
        kappa_hi: Upper diffusivity bound
        tau_bar: Largest stabilization value
        k: Polynomial degree
        transfer: Precomputed transfer data (built at order 2k + 2 if omitted)
        policy: Mesh policy providing c_prox

    Returns:
        AdmissibilityReport
    """
    policy = policy or MeshPolicy()
    if transfer is None:
        transfer = build_transfer_data(mesh, boundary, 2 * k + 2)
    beta = mesh.shape_regularity_beta
    records: List[FaceAdmissibility] = []
    if transfer:
        elements = np.array([t.element for t in transfer.values()])
        bases = ElementBasisSet(mesh.element_vertices[elements], k)
    s3_rhs = kappa_lo / (3.0 * tau_bar)
    c1_scale = (k + 1) ** 2 * (3.0 * beta + 2.0) ** k
    for i, data in enumerate(transfer.values()):
        c_ext, c_inv = estimate_face_constants(data, bases.element(i), k)
        r_e = data.r_e
        s4_lhs = (kappa_hi / kappa_lo) * r_e ** 3 * (c_ext * c_inv) ** 2
        h_elem = float(mesh.diameters[data.element])
        records.append(
            FaceAdmissibility(
                face=data.face,
                r_e=r_e,
                C_ext=c_ext,
                C_inv=c_inv,
                S3_ok=bool(data.H_perp <= s3_rhs),
                S4_ok=bool(r_e == 0 or s4_lhs <= 1.0),
                S3_margin=(s3_rhs - data.H_perp) / s3_rhs,
                S4_margin=1.0 - s4_lhs,
                H_perp=data.H_perp,
                h_perp=data.h_perp,
                d_loc=data.d_loc,
                d_loc_ok=bool(data.d_loc <= policy.c_prox * h_elem),
                reentry=data.reentry,
                C1_ratio=c_ext / c1_scale,
                H_admissible=admissible_gap_bound(data.h_perp, c_ext, c_inv, kappa_lo, kappa_hi, tau_bar),
            )
        )
    report = AdmissibilityReport(
        beta=beta,
        R=max((f.r_e for f in records), default=0.0),
        h=mesh.mesh_size_h,
        k=k,
        kappa_lo=kappa_lo,
        kappa_hi=kappa_hi,
        tau_bar=tau_bar,
        per_face=records,
    )
    if report.overall_ok:
        logger.info(f"Mesh admissible: beta={beta:.3f}, R={report.R:.4g}, {len(records)} boundary faces")
    else:
        logger.warning(f"Admissibility violated on {len(report.failing_faces)} of {len(records)} boundary faces")
    return report


@dataclass(frozen=True, eq=False)
class FittedMesh:
    """A generated mesh with its transfer data, admissibility report and the gap it was built with."""

    mesh: Triangulation
    transfer: Dict[int, TransferData]
    report: AdmissibilityReport
    gap_fraction: float


def build_mesh_for_degree(
    boundary: DomainBoundary,
    h_target: float,
    k: int,
    kappa_lo: float,
    kappa_hi: float,
    tau_bar: float,
    policy: Optional[MeshPolicy] = None,
) -> FittedMesh:
    """
    Generate a mesh whose inward gap is admissible at polynomial degree k.

    The first attempt uses policy.gap_fraction. While some face fails, the
    gap is scaled by the smallest H_admissible / H_perp over the failing
    faces (kept within [MIN_GAP_SHRINK, MAX_GAP_SHRINK]) down to
    policy.min_gap_fraction. The last attempt is returned whether or not it
    passes; callers decide what a failing report means.

    Args:
        boundary: Physical boundary
        h_target: Target mesh size
        k: Polynomial degree
        kappa_lo: Lower diffusivity bound
        kappa_hi: Upper diffusivity bound
        tau_bar: Largest stabilization value
        policy: Mesh policy (adaptive_gap=False disables shrinking)

    Returns:
        FittedMesh with transfer data at order 2k + 2
    """
    policy = policy or MeshPolicy()
    gap = policy.gap_fraction
    for _ in range(MAX_GAP_ATTEMPTS):
        current = replace(policy, gap_fraction=gap)
        mesh = build_admissible_mesh(boundary, h_target, current)
        transfer = build_transfer_data(mesh, boundary, 2 * k + 2)
        report = check_admissibility(mesh, boundary, kappa_lo, kappa_hi, tau_bar, k, transfer, current)
        if report.overall_ok or not policy.adaptive_gap or gap <= policy.min_gap_fraction:
            break
        failing = [f for f in report.per_face if not f.ok]
        ratio = min(f.H_admissible / f.H_perp for f in failing)
        shrink = float(np.clip(GAP_SAFETY * ratio, MIN_GAP_SHRINK, MAX_GAP_SHRINK))
        gap = max(policy.min_gap_fraction, gap * shrink)
        logger.info(f"{len(failing)} face(s) inadmissible at h={h_target}, k={k}; retrying with gap_fraction={gap:.4g}")
    return FittedMesh(mesh=mesh, transfer=transfer, report=report, gap_fraction=current.gap_fraction)


@dataclass(frozen=True)
class CoverageReport:
    """Area balance of the computational domain, extension patches and corner wedges."""

    domain_area: float
    mesh_area: float
    patch_area: float
    wedge_area: float

    @property
    def closure_error(self) -> float:
        return abs(self.mesh_area + self.patch_area + self.wedge_area - self.domain_area)

    @property
    def relative_error(self) -> float:
        return self.closure_error / self.domain_area

    def to_dict(self) -> Dict[str, float]:
        return {**asdict(self), "closure_error": self.closure_error, "relative_error": self.relative_error}


def patch_coverage(
    mesh: Triangulation, boundary: DomainBoundary, order: int = 16, step: Optional[float] = None
) -> CoverageReport:
    """
    Measure how patches and corner wedges tile the gap between the domains.

    Normal-direction patches of neighbouring faces leave a wedge at a convex
    polygon vertex and overlap at a reflex one; wedges carry the sign of the
    turning angle so |Omega_h| + patches + wedges = |Omega|.

    Args:
        mesh: Computational mesh
        boundary: Physical boundary
        order: Quadrature order along faces and wedge angles

    Returns:
        CoverageReport
    """
    step = step if step is not None else 0.1 * mesh.mesh_size_h
    faces = mesh.boundary_faces
    ends = mesh.face_endpoints[faces]
    normals = mesh.face_normals[faces]
    nodes, w = quadrature(Domain.SEGMENT, order)
    delta = ends[:, 1] - ends[:, 0]
    xs = ends[:, 0, None, :] + nodes[None, :, None] * delta[:, None, :]
    ns = np.broadcast_to(normals[:, None, :], xs.shape)
    lengths = anchor_points(boundary, xs.reshape(-1, 2), ns.reshape(-1, 2), step).lengths.reshape(len(faces), -1)
    patch_area = float(np.sum(mesh.face_lengths[faces] * (lengths @ w)))

    ids = np.array([
        [mesh.elements[mesh.faces[f].owner, (mesh.faces[f].local_indices[0] + d) % 3] for d in (0, 1)] for f in faces
    ])
    starting = {int(a): i for i, a in enumerate(ids[:, 0])}
    wedge_origins, wedge_dirs, wedge_turns = [], [], []
    for i, e in enumerate(ends):
        j = starting[int(ids[i, 1])]
        n1, n2 = normals[i], normals[j]
        turn = float(np.arctan2(n1[0] * n2[1] - n1[1] * n2[0], np.dot(n1, n2)))
        theta = np.arctan2(n1[1], n1[0]) + turn * nodes
        wedge_origins.append(np.repeat(e[1][None, :], len(nodes), axis=0))
        wedge_dirs.append(np.column_stack([np.cos(theta), np.sin(theta)]))
        wedge_turns.append(turn)
    rho = anchor_points(boundary, np.vstack(wedge_origins), np.vstack(wedge_dirs), step).lengths
    rho = rho.reshape(len(faces), -1)
    wedge_area = float(0.5 * np.sum(np.asarray(wedge_turns) * (rho ** 2 @ w)))
    report = CoverageReport(
        domain_area=boundary.area, mesh_area=mesh.total_area, patch_area=patch_area, wedge_area=wedge_area
    )
    logger.debug(f"Patch coverage: {report.to_dict()}")
    return report
