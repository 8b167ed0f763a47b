"""
Transfer paths from boundary faces of the computational domain to the curve.

Every boundary face e with element T^e gets quadrature points x on e, and
for each the segment x + s n_e, 0 <= s <= l(x), ending at its anchor on the
physical boundary. The union of these segments over e is the extension
patch T^e_ext.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
import shapely

from ..basis.quadrature import Domain, quadrature
from ..core.errors import NoIntersection, PathDegenerate
from ..geometry.boundary import DomainBoundary, anchor_points
from .triangulation import Triangulation

logger = logging.getLogger(__name__)

PERP_SAMPLES = 32
CROSSING_SAMPLES = 8


@dataclass(frozen=True, eq=False)
class TransferData:
    """
    Transfer-path data for one boundary face.

    points/weights are the face quadrature (weights include the face length);
    lengths and anchors belong to those points. sample_lengths are measured
    at PERP_SAMPLES equispaced points including the face end points.
    """

    face: int
    element: int
    start: np.ndarray
    end: np.ndarray
    normal: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    lengths: np.ndarray
    anchors: np.ndarray
    sample_lengths: np.ndarray
    h_perp: float
    multiple_roots: bool
    crosses_mesh: bool

    @property
    def H_perp(self) -> float:
        return float(max(self.sample_lengths.max(), self.lengths.max()))

    @property
    def r_e(self) -> float:
        return self.H_perp / self.h_perp

    @property
    def d_loc(self) -> float:
        return self.H_perp

    @property
    def reentry(self) -> bool:
        return self.multiple_roots or self.crosses_mesh

    def patch_quadrature(self, order: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Quadrature on the extension patch via (x, s) -> x + s n.

        Args:
            order: Gauss order in the path direction

        Returns:
            points (nq, ns, 2) and weights (nq, ns); the map has unit Jacobian
        """
        nodes, w = quadrature(Domain.SEGMENT, order)
        s = self.lengths[:, None] * nodes[None, :]
        points = self.points[:, None, :] + s[..., None] * self.normal
        weights = self.weights[:, None] * self.lengths[:, None] * w[None, :]
        return points, weights

    def patch_area(self) -> float:
        return float(np.dot(self.weights, self.lengths))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "face": self.face,
            "element": self.element,
            "h_perp": self.h_perp,
            "H_perp": self.H_perp,
            "r_e": self.r_e,
            "d_loc": self.d_loc,
            "multiple_roots": self.multiple_roots,
            "crosses_mesh": self.crosses_mesh,
        }


def _mesh_polygon(mesh: Triangulation) -> shapely.Polygon:
    return shapely.Polygon(mesh.boundary_polygon)


def build_transfer_data(
    mesh: Triangulation,
    boundary: DomainBoundary,
    quad_order: int,
    step: Optional[float] = None,
) -> Dict[int, TransferData]:
    """
    Anchor every boundary face of the mesh on the physical boundary.

    Args:
        mesh: Computational mesh
        boundary: Physical boundary
        quad_order: Face quadrature order (at least 2k + 2)
        step: Ray bracketing step (default a tenth of the mesh size)

    Returns:
        Mapping face index -> TransferData, in boundary-face order

    Raises:
        NoIntersection: With the face id of the first face that cannot be anchored
        PathDegenerate: If a computed path length is negative
    """
    faces = mesh.boundary_faces
    if faces.size == 0:
        return {}
    step = step if step is not None else 0.1 * mesh.mesh_size_h
    nodes, w = quadrature(Domain.SEGMENT, quad_order)
    ends = mesh.face_endpoints[faces]
    normals = mesh.face_normals[faces]
    lengths = mesh.face_lengths[faces]
    delta = ends[:, 1] - ends[:, 0]
    quad_pts = ends[:, 0, None, :] + nodes[None, :, None] * delta[:, None, :]
    ts = np.linspace(0.0, 1.0, PERP_SAMPLES)
    sample_pts = ends[:, 0, None, :] + ts[None, :, None] * delta[:, None, :]
    nq = len(nodes)
    xs = np.concatenate([quad_pts, sample_pts], axis=1)
    ns = np.broadcast_to(normals[:, None, :], xs.shape)
    try:
        batch = anchor_points(boundary, xs.reshape(-1, 2), ns.reshape(-1, 2), step)
    except NoIntersection:
        for i, face in enumerate(faces):
            try:
                anchor_points(boundary, xs[i], ns[i], step)
            except NoIntersection as e:
                raise NoIntersection(str(e), face_id=int(face)) from e
        raise
    all_lengths = batch.lengths.reshape(len(faces), -1)
    all_anchors = batch.anchors.reshape(len(faces), -1, 2)
    roots = batch.multiple_roots.reshape(len(faces), -1).any(axis=1)
    if np.any(all_lengths < 0):
        bad = faces[np.flatnonzero((all_lengths < 0).any(axis=1))[0]]
        raise PathDegenerate(f"negative transfer path length on face {int(bad)}")

    # sample points strictly inside each segment: a path must not re-enter the mesh polygon
    sample_t = (np.arange(1, CROSSING_SAMPLES + 1) / (CROSSING_SAMPLES + 1))
    samples = xs[..., None, :] + (all_lengths[..., None, None] * sample_t[None, None, :, None]) * ns[..., None, :]
    inside = shapely.contains_xy(_mesh_polygon(mesh), samples[..., 0], samples[..., 1])
    long_enough = all_lengths > 1e-12 * mesh.mesh_size_h
    crosses = (inside.any(axis=2) & long_enough).any(axis=1)

    result: Dict[int, TransferData] = {}
    for i, face_id in enumerate(faces):
        face = mesh.faces[face_id]
        element = face.owner
        opposite = mesh.vertices[mesh.elements[element, (face.local_indices[0] + 2) % 3]]
        h_perp = float(abs(np.dot(opposite - ends[i, 0], normals[i])))
        result[int(face_id)] = TransferData(
            face=int(face_id),
            element=int(element),
            start=ends[i, 0].copy(),
            end=ends[i, 1].copy(),
            normal=normals[i].copy(),
            points=quad_pts[i],
            weights=lengths[i] * w,
            lengths=all_lengths[i, :nq],
            anchors=all_anchors[i, :nq],
            sample_lengths=all_lengths[i, nq:],
            h_perp=h_perp,
            multiple_roots=bool(roots[i]),
            crosses_mesh=bool(crosses[i]),
        )
    n_cross = int(crosses.sum())
    if n_cross:
        logger.warning(f"{n_cross} boundary face(s) have transfer paths re-entering the computational domain")
    r_max = max(t.r_e for t in result.values())
    logger.info(f"Transfer data for {len(result)} boundary faces (order {quad_order}), max r_e = {r_max:.4g}")
    return result
