"""
Gauss quadrature on the reference segment [0, 1] and the reference triangle
(0,0)-(1,0)-(0,1), plus helpers mapping the rules onto physical cells.

The triangle rule is the collapsed (Duffy) tensor product of a Gauss-Jacobi
rule with weight (1 - x) and a Gauss-Legendre rule.
"""
from enum import Enum
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from ..core.errors import UnsupportedOrder

MAX_ORDER = 20


class Domain(Enum):
    """Reference domains with quadrature support."""

    TRIANGLE = "triangle"
    SEGMENT = "segment"


def _points_for_order(order: int) -> int:
    if not isinstance(order, (int, np.integer)) or order < 0 or order > MAX_ORDER:
        raise UnsupportedOrder(f"quadrature order {order} outside [0, {MAX_ORDER}]")
    return max(1, (int(order) + 2) // 2)


@lru_cache(maxsize=None)
def _segment_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    n = _points_for_order(order)
    x, w = roots_legendre(n)
    nodes = (x + 1.0) / 2.0
    weights = w / 2.0
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=None)
def _triangle_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    n = _points_for_order(order)
    x_leg, w_leg = roots_legendre(n)
    x_jac, w_jac = roots_jacobi(n, 1.0, 0.0)
    outer = (x_jac + 1.0) / 2.0
    inner = (x_leg + 1.0) / 2.0
    x = np.repeat(outer, n)
    y = (1.0 - x) * np.tile(inner, n)
    nodes = np.column_stack([x, y])
    # 2 from the Legendre map, 4 from the Jacobi map
    weights = np.outer(w_jac, w_leg).ravel() / 8.0
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def quadrature(domain: Domain, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reference quadrature rule exact for polynomials up to the given order.

    Args:
        domain: Domain.TRIANGLE or Domain.SEGMENT
        order: Polynomial degree integrated exactly, 0 <= order <= 20

    Returns:
        (nodes, weights); triangle nodes have shape (n, 2), segment nodes (n,)

    Raises:
        UnsupportedOrder: If order is outside the supported range
    """
    domain = Domain(domain)
    if domain is Domain.TRIANGLE:
        return _triangle_rule(order)
    return _segment_rule(order)


def triangle_points(vertices: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Map the reference triangle rule onto a stack of triangles.

    Args:
        vertices: Array (M, 3, 2) of triangle vertices
        order: Quadrature order

    Returns:
        points (M, nq, 2) and weights (M, nq) including |det J|
    """
    nodes, weights = quadrature(Domain.TRIANGLE, order)
    v0 = vertices[:, 0, :]
    e1 = vertices[:, 1, :] - v0
    e2 = vertices[:, 2, :] - v0
    points = (
        v0[:, None, :]
        + nodes[None, :, 0:1] * e1[:, None, :]
        + nodes[None, :, 1:2] * e2[:, None, :]
    )
    det = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return points, det[:, None] * weights[None, :]


def segment_points(starts: np.ndarray, ends: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Map the reference segment rule onto straight segments.

    Args:
        starts: Array (..., 2) of segment start points
        ends: Array (..., 2) of segment end points
        order: Quadrature order

    Returns:
        points (..., n, 2) and weights (..., n) including the segment length
    """
    nodes, weights = quadrature(Domain.SEGMENT, order)
    starts = np.asarray(starts, dtype=float)
    ends = np.asarray(ends, dtype=float)
    delta = ends - starts
    points = starts[..., None, :] + nodes[:, None] * delta[..., None, :]
    lengths = np.linalg.norm(delta, axis=-1)
    return points, lengths[..., None] * weights
