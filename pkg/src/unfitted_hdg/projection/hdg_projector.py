"""
The HDG projection (Pi_V, Pi_W) and the face L2 projection.

On each element T, (Pi_V q, Pi_W u) in [P_k]^2 x P_k solves

    (Pi_V q, v)_T = (q, v)_T                      v in [P_{k-1}]^2
    (Pi_W u, w)_T = (u, w)_T                      w in P_{k-1}
    <Pi_V q.n + tau Pi_W u, mu>_F = <q.n + tau u, mu>_F   mu in P_k(F), F in dT

which is square (3 dim equations). The element bases are hierarchical, so
P_{k-1} is spanned by their leading dim(k - 1) functions.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from ..basis.polynomials import ElementBasis, ElementBasisSet, FaceBasis, dimension, face_basis_values
from ..basis.quadrature import MAX_ORDER, Domain, quadrature, segment_points, triangle_points
from ..core.errors import SingularProjection

logger = logging.getLogger(__name__)

# (x, y) -> values; vector fields return (..., 2)
Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ProjectedPair:
    """Projected coefficients: q (M, 2, dim) and u (M, dim)."""

    q: np.ndarray
    u: np.ndarray


@dataclass(frozen=True, eq=False)
class _ProjectionQuadrature:
    vol_weights: np.ndarray
    vol_x: np.ndarray
    vol_y: np.ndarray
    phi: np.ndarray
    face_weights: np.ndarray
    face_x: np.ndarray
    face_y: np.ndarray
    phi_face: np.ndarray
    psi_face: np.ndarray
    normals: np.ndarray


def _quadrature(basis: ElementBasisSet, order: int) -> _ProjectionQuadrature:
    verts = basis.vertices
    m = len(verts)
    elements = np.arange(m)
    vol_pts, vol_w = triangle_points(verts, order)
    ends = verts[:, [1, 2, 0]]
    face_pts, face_w = segment_points(verts, ends, order)
    nq = face_pts.shape[2]
    phi_face = basis.eval_basis(face_pts.reshape(m, -1, 2), elements).reshape(m, 3, nq, basis.dim)
    edge = ends - verts
    normals = np.stack([edge[..., 1], -edge[..., 0]], axis=-1) / np.linalg.norm(edge, axis=-1)[..., None]
    return _ProjectionQuadrature(
        vol_weights=vol_w,
        vol_x=vol_pts[..., 0],
        vol_y=vol_pts[..., 1],
        phi=basis.eval_basis(vol_pts, elements),
        face_weights=face_w,
        face_x=face_pts[..., 0],
        face_y=face_pts[..., 1],
        phi_face=phi_face,
        psi_face=face_basis_values(face_pts, verts, ends, basis.degree),
        normals=normals,
    )


def _system(basis: ElementBasisSet, quad: _ProjectionQuadrature, tau: np.ndarray) -> np.ndarray:
    """Projection matrices (M, 3 dim, 3 dim) for unknowns [q_x, q_y, u]."""
    n = basis.dim
    nl = dimension(basis.degree - 1) if basis.degree > 0 else 0
    nf = basis.degree + 1
    m = len(basis)
    A = np.zeros((m, 3 * n, 3 * n))
    mass = np.einsum("eq,eqi,eqj->eij", quad.vol_weights, quad.phi[..., :nl], quad.phi)
    A[:, :nl, :n] = mass
    A[:, nl : 2 * nl, n : 2 * n] = mass
    A[:, 2 * nl : 3 * nl, 2 * n :] = mass
    row = 3 * nl
    for f in range(3):
        w = quad.face_weights[:, f]
        psi = quad.psi_face[:, f]
        phi = quad.phi_face[:, f]
        base = np.einsum("eq,eqm,eqj->emj", w, psi, phi)
        rows = slice(row + f * nf, row + (f + 1) * nf)
        A[:, rows, :n] = base * quad.normals[:, f, 0, None, None]
        A[:, rows, n : 2 * n] = base * quad.normals[:, f, 1, None, None]
        A[:, rows, 2 * n :] = base * tau[:, f, None, None]
    return A


def _rhs(
    basis: ElementBasisSet, quad: _ProjectionQuadrature, tau: np.ndarray, q_exact: Field, u_exact: Field
) -> np.ndarray:
    n = basis.dim
    nl = dimension(basis.degree - 1) if basis.degree > 0 else 0
    q_vol = np.asarray(q_exact(quad.vol_x, quad.vol_y), dtype=float)
    u_vol = np.asarray(u_exact(quad.vol_x, quad.vol_y), dtype=float)
    phi_l = quad.phi[..., :nl]
    parts = [
        np.einsum("eq,eq,eqi->ei", quad.vol_weights, q_vol[..., 0], phi_l),
        np.einsum("eq,eq,eqi->ei", quad.vol_weights, q_vol[..., 1], phi_l),
        np.einsum("eq,eq,eqi->ei", quad.vol_weights, u_vol, phi_l),
    ]
    q_face = np.asarray(q_exact(quad.face_x, quad.face_y), dtype=float)
    u_face = np.asarray(u_exact(quad.face_x, quad.face_y), dtype=float)
    flux = np.einsum("efqd,efd->efq", q_face, quad.normals) + tau[..., None] * u_face
    face = np.einsum("efq,efq,efqm->efm", quad.face_weights, flux, quad.psi_face)
    return np.concatenate(parts + [face.reshape(len(basis), -1)], axis=1)


def _default_order(degree: int) -> int:
    return min(2 * degree + 4, MAX_ORDER)


def project_fields(
    basis: ElementBasisSet,
    tau: np.ndarray,
    q_exact: Field,
    u_exact: Field,
    order: Optional[int] = None,
) -> ProjectedPair:
    """
    HDG projection on every element of a basis set.

    Args:
        basis: Element bases
        tau: Stabilization per element face (M, 3), local face order
        q_exact: Vector field (x, y) -> (..., 2)
        u_exact: Scalar field (x, y) -> (...)
        order: Quadrature order (default 2k + 4)

    Returns:
        ProjectedPair

    Raises:
        SingularProjection: If tau vanishes on every face of some element
    """
    tau = np.asarray(tau, dtype=float).reshape(len(basis), 3)
    if np.any(tau.max(axis=1) <= 0):
        raise SingularProjection("stabilization must be positive on at least one face of every element")
    quad = _quadrature(basis, order if order is not None else _default_order(basis.degree))
    A = _system(basis, quad, tau)
    b = _rhs(basis, quad, tau, q_exact, u_exact)
    try:
        x = np.linalg.solve(A, b[..., None])[..., 0]
    except np.linalg.LinAlgError as e:
        logger.error(f"Error in HDG projection: {e}")
        raise SingularProjection(f"projection system is singular: {e}") from e
    n = basis.dim
    return ProjectedPair(q=x[:, : 2 * n].reshape(-1, 2, n), u=x[:, 2 * n :])


def hdg_project(element: ElementBasis, q_exact: Field, u_exact: Field, tau: float = 1.0) -> ProjectedPair:
    """HDG projection on one element with tau given per face or as a constant."""
    basis = ElementBasisSet(element.vertices[None], element.degree)
    tau_faces = np.broadcast_to(np.asarray(tau, dtype=float), (3,))[None, :]
    pair = project_fields(basis, tau_faces, q_exact, u_exact)
    return ProjectedPair(q=pair.q[0], u=pair.u[0])


def project_sigma(basis: ElementBasisSet, tau: np.ndarray, sigma_exact: Field, u_exact: Field) -> np.ndarray:
    """Pi_V sigma := -Pi_V(-sigma, u), coefficients (M, 2, dim)."""
    pair = project_fields(basis, tau, lambda x, y: -np.asarray(sigma_exact(x, y)), u_exact)
    return -pair.q


def projection_residuals(
    basis: ElementBasisSet,
    tau: np.ndarray,
    pair: ProjectedPair,
    q_exact: Field,
    u_exact: Field,
    order: Optional[int] = None,
) -> Dict[str, float]:
    """
    Relative residuals of the three defining conditions, maximized over elements.

    Returns:
        Mapping with keys 'volume_q', 'volume_u' and 'face_flux'
    """
    tau = np.asarray(tau, dtype=float).reshape(len(basis), 3)
    quad = _quadrature(basis, order if order is not None else _default_order(basis.degree))
    A = _system(basis, quad, tau)
    b = _rhs(basis, quad, tau, q_exact, u_exact)
    x = np.concatenate([pair.q.reshape(len(basis), -1), pair.u], axis=1)
    r = np.einsum("eij,ej->ei", A, x) - b
    nl = dimension(basis.degree - 1) if basis.degree > 0 else 0
    scale = np.abs(b).max(axis=1) + np.abs(A).max(axis=(1, 2)) * np.abs(x).max(axis=1)
    scale = np.where(scale > 0, scale, 1.0)[:, None]
    rel = np.abs(r) / scale

    def worst(block: np.ndarray) -> float:
        return float(block.max()) if block.size else 0.0

    return {
        "volume_q": worst(rel[:, : 2 * nl]),
        "volume_u": worst(rel[:, 2 * nl : 3 * nl]),
        "face_flux": worst(rel[:, 3 * nl :]),
    }


def face_l2_project(face: FaceBasis, trace: Field, order: int = MAX_ORDER) -> np.ndarray:
    """
    L2 projection of a trace onto P_k(F) in the orthonormal face basis.

    Args:
        face: Face basis
        trace: Scalar field (x, y) -> values
        order: Quadrature order

    Returns:
        Coefficients (k + 1,)
    """
    nodes, weights = quadrature(Domain.SEGMENT, order)
    s = nodes * face.length
    points = face.point_at(s)
    values = np.asarray(trace(points[:, 0], points[:, 1]), dtype=float)
    return (weights * face.length * values) @ face.eval_param(s)


def face_projector_coefficients(
    starts: np.ndarray, ends: np.ndarray, degree: int, trace: Field, order: int = MAX_ORDER
) -> np.ndarray:
    """Batched face L2 projection over faces (F, 2) -> coefficients (F, k + 1)."""
    points, weights = segment_points(starts, ends, order)
    values = np.asarray(trace(points[..., 0], points[..., 1]), dtype=float)
    psi = face_basis_values(points, starts, ends, degree)
    return np.einsum("fq,fq,fqm->fm", weights, values, psi)


def face_basis_for(start: np.ndarray, end: np.ndarray, degree: int) -> FaceBasis:
    return FaceBasis(degree=degree, start=np.asarray(start, dtype=float), end=np.asarray(end, dtype=float))
