"""
Computational-domain mesh generation.

The computational boundary is the curve sampled at arc-length spacing h and
pulled inward by gap_fraction * h along the normal; the enclosed polygon is
filled with an equilateral point lattice and triangulated by Delaunay, with
polygon edges recovered by splitting until every one of them is a mesh edge.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
import shapely
from scipy.spatial import Delaunay

from ..core.errors import ConfigurationError, MeshGenerationError, QualityFailure
from ..geometry.boundary import DomainBoundary
from .triangulation import Triangulation

logger = logging.getLogger(__name__)

LATTICE_CLEARANCE = 0.6
MAX_EDGE_RECOVERY_PASSES = 6


@dataclass(frozen=True)
class MeshPolicy:
    """Mesh generation knobs."""

    beta_max: float = 5.0
    gap_fraction: float = 0.25
    c_prox: float = 1.5
    smoothing_sweeps: int = 3
    adaptive_gap: bool = True
    min_gap_fraction: float = 0.01

    def __post_init__(self) -> None:
        if self.beta_max <= 1.0:
            raise ConfigurationError("beta_max must exceed 1", "mesh.beta_max")
        if not 0.0 <= self.gap_fraction < 1.0:
            raise ConfigurationError("gap_fraction must lie in [0, 1)", "mesh.gap_fraction")
        if self.c_prox <= 0:
            raise ConfigurationError("c_prox must be positive", "mesh.c_prox")
        if self.smoothing_sweeps < 0:
            raise ConfigurationError("smoothing_sweeps must be non-negative", "mesh.smoothing_sweeps")
        if not 0.0 < self.min_gap_fraction < 1.0:
            raise ConfigurationError("min_gap_fraction must lie in (0, 1)", "mesh.min_gap_fraction")

    @classmethod
    def from_settings(cls, section: Optional[Dict[str, Any]]) -> "MeshPolicy":
        section = section or {}
        known = {k: section[k] for k in cls.__dataclass_fields__ if k in section}
        return cls(**known)


def _lattice(polygon: shapely.Polygon, h: float) -> np.ndarray:
    x0, y0, x1, y1 = polygon.bounds
    dy = h * np.sqrt(3.0) / 2.0
    rows = np.arange(y0, y1 + dy, dy)
    cols = np.arange(x0, x1 + h, h)
    xx = cols[None, :] + 0.5 * h * (np.arange(len(rows)) % 2)[:, None]
    yy = np.broadcast_to(rows[:, None], xx.shape)
    candidates = np.column_stack([xx.ravel(), yy.ravel()])
    inside = shapely.contains_xy(polygon, candidates[:, 0], candidates[:, 1])
    candidates = candidates[inside]
    if len(candidates) == 0:
        return candidates
    clearance = shapely.distance(polygon.exterior, shapely.points(candidates))
    return candidates[clearance >= LATTICE_CLEARANCE * h]


def _triangulate(polygon_pts: np.ndarray, interior: np.ndarray, polygon: shapely.Polygon) -> np.ndarray:
    points = np.vstack([polygon_pts, interior]) if len(interior) else polygon_pts
    simplices = Delaunay(points).simplices
    centroids = points[simplices].mean(axis=1)
    keep = shapely.contains_xy(polygon, centroids[:, 0], centroids[:, 1])
    return simplices[keep]


def _missing_polygon_edges(simplices: np.ndarray, n_polygon: int) -> np.ndarray:
    edges = set()
    for a, b, c in simplices:
        for p, q in ((a, b), (b, c), (c, a)):
            edges.add((min(p, q), max(p, q)))
    missing = [
        i
        for i in range(n_polygon)
        if (min(i, (i + 1) % n_polygon), max(i, (i + 1) % n_polygon)) not in edges
    ]
    return np.asarray(missing, dtype=np.int64)


def _smooth(points: np.ndarray, simplices: np.ndarray, n_fixed: int, polygon: shapely.Polygon, sweeps: int) -> np.ndarray:
    """Laplacian smoothing of free vertices; a sweep is dropped if it inverts any element."""
    if sweeps == 0 or len(points) == n_fixed:
        return points
    neighbors = [set() for _ in range(len(points))]
    for tri in simplices:
        for i in tri:
            neighbors[i].update(int(j) for j in tri if j != i)
    free = np.arange(n_fixed, len(points))
    for _ in range(sweeps):
        candidate = points.copy()
        for i in free:
            candidate[i] = points[list(neighbors[i])].mean(axis=0)
        inside = shapely.contains_xy(polygon, candidate[free, 0], candidate[free, 1])
        candidate[free[~inside]] = points[free[~inside]]
        tri = candidate[simplices]
        signed = (tri[:, 1, 0] - tri[:, 0, 0]) * (tri[:, 2, 1] - tri[:, 0, 1]) - (tri[:, 1, 1] - tri[:, 0, 1]) * (
            tri[:, 2, 0] - tri[:, 0, 0]
        )
        before = points[simplices]
        signed_before = (before[:, 1, 0] - before[:, 0, 0]) * (before[:, 2, 1] - before[:, 0, 1]) - (
            before[:, 1, 1] - before[:, 0, 1]
        ) * (before[:, 2, 0] - before[:, 0, 0])
        if np.any(np.sign(signed) != np.sign(signed_before)):
            logger.debug("Smoothing sweep rejected: it would invert an element")
            break
        points = candidate
    return points


def build_admissible_mesh(
    boundary: DomainBoundary, h_target: float, policy: Optional[MeshPolicy] = None
) -> Triangulation:
    """
    Triangulate a polygon inscribed in the physical domain.

    Args:
        boundary: Physical boundary
        h_target: Target mesh size
        policy: Generation policy (defaults apply when omitted)

    Returns:
        Conforming triangulation whose vertices lie strictly inside the domain

    Raises:
        ConfigurationError: If h_target is not below a quarter of the diameter
        MeshGenerationError: If the offset polygon or the edge recovery fails
        QualityFailure: If the shape-regularity bound is exceeded
    """
    policy = policy or MeshPolicy()
    diameter = boundary.diameter
    if not 0 < h_target <= diameter / 4.0 * (1 + 1e-12):
        raise ConfigurationError(f"h_target {h_target} must lie in (0, diameter/4 = {diameter / 4:.6g}]", "h")

    samples, normals = boundary.sample_arclength(h_target)
    polygon_pts = samples - policy.gap_fraction * h_target * normals
    polygon = shapely.Polygon(polygon_pts)
    if not polygon.is_valid:
        raise MeshGenerationError(f"inward offset of '{boundary.name}' by {policy.gap_fraction}*h is not a simple polygon")
    interior = _lattice(polygon, h_target)

    for _ in range(MAX_EDGE_RECOVERY_PASSES):
        simplices = _triangulate(polygon_pts, interior, polygon)
        missing = _missing_polygon_edges(simplices, len(polygon_pts))
        if missing.size == 0:
            break
        logger.debug(f"Recovering {missing.size} polygon edge(s) by splitting")
        midpoints = 0.5 * (polygon_pts[missing] + polygon_pts[(missing + 1) % len(polygon_pts)])
        polygon_pts = np.insert(polygon_pts, missing + 1, midpoints, axis=0)
    else:
        raise MeshGenerationError(f"could not recover all computational boundary edges for '{boundary.name}'")

    points = np.vstack([polygon_pts, interior]) if len(interior) else polygon_pts
    used = np.unique(simplices)
    if used.size != len(points):
        remap = -np.ones(len(points), dtype=np.int64)
        remap[used] = np.arange(used.size)
        n_fixed = int(np.count_nonzero(used < len(polygon_pts)))
        points, simplices = points[used], remap[simplices]
    else:
        n_fixed = len(polygon_pts)
    points = _smooth(points, simplices, n_fixed, polygon, policy.smoothing_sweeps)

    mesh = Triangulation.from_arrays(points, simplices)
    if np.any(boundary.signed_distance(mesh.vertices) >= 0):
        raise MeshGenerationError("computational domain is not strictly inside the physical domain")
    beta = mesh.shape_regularity_beta
    if beta > policy.beta_max:
        raise QualityFailure(f"shape regularity {beta:.3f} exceeds beta_max {policy.beta_max} at h={h_target}")
    logger.info(
        f"Mesh for '{boundary.name}' at h_target={h_target}: {mesh.n_elements} elements, "
        f"h={mesh.mesh_size_h:.4g}, beta={beta:.3f}"
    )
    return mesh
