"""
Conforming triangulations of the polygonal computational domain.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Dict, List, Tuple

import numpy as np

from ..core.errors import MeshGenerationError

logger = logging.getLogger(__name__)


class FaceKind(Enum):
    """Skeleton face classification."""

    INTERIOR = "interior"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class Face:
    """
    One skeleton face (edge).

    The normal is the unit outward normal of elements[0]; local_indices gives
    the face's local position (0..2) in each adjacent element, where local
    face j of an element joins its vertices j and j+1 (mod 3).
    """

    index: int
    vertices: Tuple[int, int]
    kind: FaceKind
    elements: Tuple[int, ...]
    local_indices: Tuple[int, ...]
    normal: np.ndarray
    length: float

    @property
    def owner(self) -> int:
        return self.elements[0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "vertices": list(self.vertices),
            "kind": self.kind.value,
            "elements": list(self.elements),
            "normal": [float(c) for c in self.normal],
            "length": self.length,
        }


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Triangles with their skeleton and geometric quality metrics."""

    vertices: np.ndarray
    elements: np.ndarray
    faces: Tuple[Face, ...]
    element_faces: np.ndarray
    element_face_signs: np.ndarray

    @classmethod
    def from_arrays(cls, vertices: np.ndarray, elements: np.ndarray) -> "Triangulation":
        """
        Build the skeleton of a triangle list.

        Elements are reoriented counterclockwise. Faces are numbered in order
        of first appearance while sweeping elements and their local faces.

        Raises:
            MeshGenerationError: On degenerate elements or non-conforming faces
        """
        vertices = np.asarray(vertices, dtype=float).copy()
        elements = np.asarray(elements, dtype=np.int64).copy()
        tri = vertices[elements]
        signed = 0.5 * (
            (tri[:, 1, 0] - tri[:, 0, 0]) * (tri[:, 2, 1] - tri[:, 0, 1])
            - (tri[:, 1, 1] - tri[:, 0, 1]) * (tri[:, 2, 0] - tri[:, 0, 0])
        )
        scale = np.max(np.ptp(vertices, axis=0)) ** 2 if len(vertices) else 1.0
        if np.any(np.abs(signed) <= 1e-14 * scale):
            raise MeshGenerationError("triangulation contains zero-area elements")
        flip = signed < 0
        elements[flip] = elements[flip][:, [0, 2, 1]]

        lookup: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}
        order: List[Tuple[int, int]] = []
        for t, (a, b, c) in enumerate(elements):
            for j, (p, q) in enumerate(((a, b), (b, c), (c, a))):
                key = (min(p, q), max(p, q))
                if key not in lookup:
                    lookup[key] = []
                    order.append(key)
                lookup[key].append((t, j))

        faces: List[Face] = []
        element_faces = np.zeros(elements.shape, dtype=np.int64)
        signs = np.zeros(elements.shape, dtype=float)
        for index, key in enumerate(order):
            owners = lookup[key]
            if len(owners) > 2:
                raise MeshGenerationError(f"face {key} is shared by {len(owners)} elements")
            t0, j0 = owners[0]
            p = vertices[elements[t0, j0]]
            q = vertices[elements[t0, (j0 + 1) % 3]]
            edge = q - p
            length = float(np.hypot(edge[0], edge[1]))
            # counterclockwise element: outward normal is the edge rotated clockwise
            normal = np.array([edge[1], -edge[0]]) / length
            normal.setflags(write=False)
            for pos, (t, j) in enumerate(owners):
                element_faces[t, j] = index
                signs[t, j] = 1.0 if pos == 0 else -1.0
            faces.append(
                Face(
                    index=index,
                    vertices=key,
                    kind=FaceKind.INTERIOR if len(owners) == 2 else FaceKind.BOUNDARY,
                    elements=tuple(t for t, _ in owners),
                    local_indices=tuple(j for _, j in owners),
                    normal=normal,
                    length=length,
                )
            )
        for array in (vertices, elements, element_faces, signs):
            array.setflags(write=False)
        mesh = cls(
            vertices=vertices,
            elements=elements,
            faces=tuple(faces),
            element_faces=element_faces,
            element_face_signs=signs,
        )
        logger.debug(
            f"Triangulation: {mesh.n_elements} elements, {mesh.n_faces} faces "
            f"({len(mesh.boundary_faces)} on the boundary)"
        )
        return mesh

    @property
    def n_elements(self) -> int:
        return int(self.elements.shape[0])

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def element_vertices(self) -> np.ndarray:
        """Vertex coordinates per element, shape (M, 3, 2)."""
        return self.vertices[self.elements]

    @cached_property
    def boundary_faces(self) -> np.ndarray:
        return np.array([f.index for f in self.faces if f.kind is FaceKind.BOUNDARY], dtype=np.int64)

    @cached_property
    def interior_faces(self) -> np.ndarray:
        return np.array([f.index for f in self.faces if f.kind is FaceKind.INTERIOR], dtype=np.int64)

    @cached_property
    def face_endpoints(self) -> np.ndarray:
        """Face end points (F, 2, 2) oriented along the owner's counterclockwise traversal."""
        ends = np.empty((self.n_faces, 2, 2))
        for face in self.faces:
            t, j = face.owner, face.local_indices[0]
            ends[face.index, 0] = self.vertices[self.elements[t, j]]
            ends[face.index, 1] = self.vertices[self.elements[t, (j + 1) % 3]]
        return ends

    @cached_property
    def face_normals(self) -> np.ndarray:
        return np.array([f.normal for f in self.faces])

    @cached_property
    def face_lengths(self) -> np.ndarray:
        return np.array([f.length for f in self.faces])

    @cached_property
    def areas(self) -> np.ndarray:
        tri = self.element_vertices
        e1 = tri[:, 1] - tri[:, 0]
        e2 = tri[:, 2] - tri[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        tri = self.element_vertices
        return np.linalg.norm(tri[:, [1, 2, 0]] - tri, axis=2)

    @cached_property
    def diameters(self) -> np.ndarray:
        """h_T: longest edge."""
        return self.edge_lengths.max(axis=1)

    @cached_property
    def rho(self) -> np.ndarray:
        """rho_T: diameter of the inscribed circle."""
        return 4.0 * self.areas / self.edge_lengths.sum(axis=1)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.element_vertices.mean(axis=1)

    @property
    def mesh_size_h(self) -> float:
        return float(self.diameters.max())

    @property
    def shape_regularity_beta(self) -> float:
        return float((self.diameters / self.rho).max())

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @cached_property
    def boundary_polygon(self) -> np.ndarray:
        """Vertices of the computational boundary in counterclockwise order."""
        successor = {}
        for index in self.boundary_faces:
            face = self.faces[index]
            t, j = face.owner, face.local_indices[0]
            successor[int(self.elements[t, j])] = int(self.elements[t, (j + 1) % 3])
        if not successor:
            return np.empty((0, 2))
        first = min(successor)
        loop = [first]
        while successor[loop[-1]] != first:
            loop.append(successor[loop[-1]])
            if len(loop) > len(successor):
                raise MeshGenerationError("computational boundary is not a single closed loop")
        if len(loop) != len(successor):
            raise MeshGenerationError("computational boundary has more than one component")
        return self.vertices[loop]

    def summary(self) -> Dict[str, Any]:
        return {
            "vertices": int(len(self.vertices)),
            "elements": self.n_elements,
            "faces": self.n_faces,
            "boundary_faces": int(len(self.boundary_faces)),
            "mesh_size_h": self.mesh_size_h,
            "shape_regularity_beta": self.shape_regularity_beta,
        }
