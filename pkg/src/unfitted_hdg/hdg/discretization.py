"""
Discretization cache: bases, quadrature and every coefficient-independent
block of the local HDG systems, shared by all Picard steps on one mesh.
"""
import logging
from functools import cached_property
from typing import Dict, Optional

import numpy as np

from ..basis.polynomials import ElementBasisSet, dimension, face_basis_values
from ..basis.quadrature import segment_points, triangle_points
from ..core.errors import ConfigurationError
from ..mesh.transfer import TransferData
from ..mesh.triangulation import Triangulation

logger = logging.getLogger(__name__)


class HDGDiscretization:
    """
    HDG spaces of degree k on a computational mesh.

    Local unknown ordering is [q_x, q_y, u] (3 dim) and, for the gradient
    variant, [sigma_x, sigma_y, q_x, q_y, u] (5 dim). Trace unknowns on an
    element are its three faces in local order, k + 1 coefficients each.
    """

    def __init__(
        self,
        mesh: Triangulation,
        transfer: Dict[int, TransferData],
        k: int,
        tau: float = 1.0,
        tau_boundary: Optional[float] = None,
    ):
        """
        Precompute bases, quadrature and constant blocks.

        Args:
            mesh: Computational mesh
            transfer: Transfer data for every boundary face
            k: Polynomial degree
            tau: Stabilization on interior faces
            tau_boundary: Stabilization on boundary faces (tau when None)
        """
        if tau <= 0 or (tau_boundary is not None and tau_boundary <= 0):
            raise ConfigurationError("stabilization must be positive", "tau")
        missing = set(int(f) for f in mesh.boundary_faces) - set(transfer)
        if missing:
            raise ConfigurationError(f"no transfer data for boundary faces {sorted(missing)[:5]}", "transfer")
        self.mesh = mesh
        self.transfer = transfer
        self.k = k
        self.n = dimension(k)
        self.nf = k + 1
        self.order = 2 * k + 2
        self.basis = ElementBasisSet(mesh.element_vertices, k)

        self.tau_faces = np.full(mesh.n_faces, float(tau))
        self.tau_faces[mesh.boundary_faces] = tau if tau_boundary is None else float(tau_boundary)
        self.tau_bar = float(self.tau_faces.max())

        all_elements = np.arange(mesh.n_elements)
        self.vol_points, self.vol_weights = triangle_points(mesh.element_vertices, self.order)
        self.phi = self.basis.eval_basis(self.vol_points, all_elements)
        self.grad = self.basis.grad_basis(self.vol_points, all_elements)

        verts = mesh.element_vertices
        starts = verts
        ends = verts[:, [1, 2, 0]]
        self.face_points, self.face_weights = segment_points(starts, ends, self.order)
        m, _, nq, _ = self.face_points.shape
        flat = self.face_points.reshape(m, 3 * nq, 2)
        self.phi_face = self.basis.eval_basis(flat, all_elements).reshape(m, 3, nq, self.n)
        global_ends = mesh.face_endpoints[mesh.element_faces]
        self.psi_face = face_basis_values(self.face_points, global_ends[..., 0, :], global_ends[..., 1, :], k)
        edge = ends - starts
        self.normals = np.stack([edge[..., 1], -edge[..., 0]], axis=-1) / np.linalg.norm(edge, axis=-1)[..., None]
        self.tau_local = self.tau_faces[mesh.element_faces]
        self.dofs = (mesh.element_faces[:, :, None] * self.nf + np.arange(self.nf)).reshape(m, 3 * self.nf)
        self.n_dofs = mesh.n_faces * self.nf
        self.is_boundary_local = np.isin(mesh.element_faces, mesh.boundary_faces)
        logger.debug(f"HDG discretization: k={k}, {m} elements, {self.n_dofs} trace dofs")

    # ----------------------------------------------------- constant blocks
    @cached_property
    def mass(self) -> np.ndarray:
        """(phi_i, phi_j)_T, shape (M, n, n)."""
        return np.einsum("eq,eqi,eqj->eij", self.vol_weights, self.phi, self.phi)

    @cached_property
    def b_blocks(self) -> np.ndarray:
        """B_d[i, j] = -(d_d phi_i, phi_j)_T, shape (2, M, n, n)."""
        return -np.einsum("eq,eqid,eqj->deij", self.vol_weights, self.grad, self.phi)

    @cached_property
    def e_blocks(self) -> np.ndarray:
        """E_d[i, j] = <phi_i phi_j n_d>_dT, shape (2, M, n, n)."""
        return np.einsum("efq,efqi,efqj,efd->deij", self.face_weights, self.phi_face, self.phi_face, self.normals)

    @cached_property
    def s_block(self) -> np.ndarray:
        """sum over faces of tau <phi_i, phi_j>, shape (M, n, n)."""
        return np.einsum("ef,efq,efqi,efqj->eij", self.tau_local, self.face_weights, self.phi_face, self.phi_face)

    @cached_property
    def c_blocks(self) -> np.ndarray:
        """C_d[i, (f, m)] = <phi_i n_d, psi_m>_F_f, shape (2, M, n, 3 (k + 1))."""
        c = np.einsum("efq,efqi,efd,efqm->deifm", self.face_weights, self.phi_face, self.normals, self.psi_face)
        return c.reshape(2, self.mesh.n_elements, self.n, 3 * self.nf)

    @cached_property
    def h_block(self) -> np.ndarray:
        """H[i, (f, m)] = tau <phi_i, psi_m>_F_f, shape (M, n, 3 (k + 1))."""
        h = np.einsum("ef,efq,efqi,efqm->eifm", self.tau_local, self.face_weights, self.phi_face, self.psi_face)
        return h.reshape(self.mesh.n_elements, self.n, 3 * self.nf)

    @cached_property
    def trace_mass(self) -> np.ndarray:
        """Block diagonal tau <psi_m, psi_l>_F over the element's faces, (M, 3 (k+1), 3 (k+1))."""
        local = np.einsum("ef,efq,efqm,efql->efml", self.tau_local, self.face_weights, self.psi_face, self.psi_face)
        m = self.mesh.n_elements
        out = np.zeros((m, 3 * self.nf, 3 * self.nf))
        for f in range(3):
            block = slice(f * self.nf, (f + 1) * self.nf)
            out[:, block, block] = local[:, f]
        return out

    # ----------------------------------------------------- transfer cache
    @cached_property
    def boundary_order(self) -> np.ndarray:
        """Boundary face ids in transfer order."""
        return np.array(list(self.transfer.keys()), dtype=np.int64)

    @cached_property
    def transfer_cache(self) -> Dict[str, np.ndarray]:
        """
        Path quadrature for all boundary faces (coefficient independent).

        Keys: element (B,), local (B,), psi (B, nq, k+1), weights (B, nq),
        anchors (B, nq, 2), path_points (B, nq * ns, 2), path_weights
        (B, nq * ns), path_phi (B, nq * ns, n), path_owner (B, nq * ns)
        mapping path points to their face quadrature point, normal (B, 2),
        lengths (B, nq).
        """
        faces = self.boundary_order
        data = [self.transfer[int(f)] for f in faces]
        if not data:
            return {}
        elements = np.array([d.element for d in data], dtype=np.int64)
        local = np.array(
            [self.mesh.faces[d.face].local_indices[0] for d in data], dtype=np.int64
        )
        points = np.stack([d.points for d in data])
        starts = np.stack([d.start for d in data])
        ends = np.stack([d.end for d in data])
        psi = face_basis_values(points, starts, ends, self.k)
        path = [d.patch_quadrature(self.order) for d in data]
        nq, ns = path[0][1].shape
        path_points = np.stack([p.reshape(-1, 2) for p, _ in path])
        path_weights = np.stack([w.ravel() for _, w in path])
        path_phi = self.basis.eval_basis(path_points, elements)
        return {
            "faces": faces,
            "element": elements,
            "local": local,
            "psi": psi,
            "weights": np.stack([d.weights for d in data]),
            "anchors": np.stack([d.anchors for d in data]),
            "lengths": np.stack([d.lengths for d in data]),
            "normal": np.stack([d.normal for d in data]),
            "path_points": path_points,
            "path_weights": path_weights,
            "path_phi": path_phi,
            "path_owner": np.repeat(np.arange(nq), ns),
        }
