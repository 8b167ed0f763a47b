"""
Plain-text mesh files.

Layout::

    unfitted-hdg-mesh v1
    vertices <N>
    <x> <y>                                  (N lines)
    elements <M>
    <a> <b> <c>                              (M lines, counterclockwise)
    boundary-faces <B>
    face <id> element <T> points <n>         (B blocks)
    <x> <y> <weight> <length> <ax> <ay>      (n lines per block)

Floats carry 17 significant digits.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from ..core.errors import MeshGenerationError
from .transfer import TransferData
from .triangulation import Triangulation

logger = logging.getLogger(__name__)

HEADER = "unfitted-hdg-mesh v1"
FLOAT = "%.17g"


@dataclass(frozen=True, eq=False)
class MeshFile:
    """Contents of a mesh file: the triangulation and per-face path records."""

    mesh: Triangulation
    paths: Dict[int, np.ndarray] = field(default_factory=dict)


def write_mesh(
    path: Union[str, Path], mesh: Triangulation, transfer: Optional[Dict[int, TransferData]] = None
) -> Path:
    """Write a mesh (and its transfer paths when given) to a text file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines: List[str] = [HEADER, f"vertices {len(mesh.vertices)}"]
    lines += [f"{FLOAT % x} {FLOAT % y}" for x, y in mesh.vertices]
    lines.append(f"elements {mesh.n_elements}")
    lines += [f"{a} {b} {c}" for a, b, c in mesh.elements]
    transfer = transfer or {}
    lines.append(f"boundary-faces {len(transfer)}")
    for face_id, data in transfer.items():
        lines.append(f"face {face_id} element {data.element} points {len(data.lengths)}")
        for (x, y), weight, length, (ax, ay) in zip(data.points, data.weights, data.lengths, data.anchors):
            lines.append(" ".join(FLOAT % v for v in (x, y, weight, length, ax, ay)))
    path.write_text("\n".join(lines) + "\n")
    logger.info(f"Mesh written to {path}")
    return path


def read_mesh(path: Union[str, Path]) -> MeshFile:
    """
    Read a mesh file written by write_mesh.

    Raises:
        MeshGenerationError: If the file is not a valid mesh file
    """
    path = Path(path)
    try:
        rows = [line.split() for line in path.read_text().splitlines() if line.strip()]
        if " ".join(rows[0]) != HEADER:
            raise MeshGenerationError(f"{path} is not an {HEADER} file")
        pos = 1
        n_vertices = int(rows[pos][1])
        vertices = np.array(rows[pos + 1 : pos + 1 + n_vertices], dtype=float).reshape(-1, 2)
        pos += 1 + n_vertices
        n_elements = int(rows[pos][1])
        elements = np.array(rows[pos + 1 : pos + 1 + n_elements], dtype=np.int64).reshape(-1, 3)
        pos += 1 + n_elements
        n_faces = int(rows[pos][1])
        pos += 1
        paths: Dict[int, np.ndarray] = {}
        for _ in range(n_faces):
            face_id, n_points = int(rows[pos][1]), int(rows[pos][5])
            paths[face_id] = np.array(rows[pos + 1 : pos + 1 + n_points], dtype=float).reshape(-1, 6)
            pos += 1 + n_points
    except (IndexError, ValueError) as e:
        logger.error(f"Error reading mesh file {path}: {e}")
        raise MeshGenerationError(f"malformed mesh file {path}: {e}") from e
    return MeshFile(mesh=Triangulation.from_arrays(vertices, elements), paths=paths)
