"""
Orthonormal polynomial bases on triangles and faces.

Element bases are scaled monomials about the element centroid, orthonormalized
by modified Gram-Schmidt in the element L2 inner product. Evaluation is a
plain polynomial evaluation, so it is valid at any physical point; outside
the element it is the extrapolation used on extension patches.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from numpy.polynomial import legendre

from ..core.errors import SingularGram, UnsupportedOrder
from .quadrature import triangle_points

logger = logging.getLogger(__name__)

MAX_DEGREE = 3


def dimension(k: int) -> int:
    """dim P_k on a triangle."""
    return (k + 1) * (k + 2) // 2


@lru_cache(maxsize=None)
def monomial_exponents(k: int) -> np.ndarray:
    """Exponents (a, b) of x^a y^b, a + b <= k, ordered by total degree."""
    exps = [(d - b, b) for d in range(k + 1) for b in range(d + 1)]
    out = np.array(exps, dtype=int).reshape(-1, 2)
    out.setflags(write=False)
    return out


def monomial_values(xi: np.ndarray, k: int) -> np.ndarray:
    """Monomials at points xi (..., 2); returns (..., dim)."""
    exps = monomial_exponents(k)
    return xi[..., 0:1] ** exps[:, 0] * xi[..., 1:2] ** exps[:, 1]


def monomial_gradients(xi: np.ndarray, k: int) -> np.ndarray:
    """Gradients of the monomials with respect to xi; returns (..., dim, 2)."""
    exps = monomial_exponents(k)
    a, b = exps[:, 0], exps[:, 1]
    x, y = xi[..., 0:1], xi[..., 1:2]
    dx = np.where(a > 0, a * x ** np.maximum(a - 1, 0), 0.0) * y ** b
    dy = x ** a * np.where(b > 0, b * y ** np.maximum(b - 1, 0), 0.0)
    return np.stack([dx, dy], axis=-1)


def modified_gram_schmidt(gram: np.ndarray, rel_tol: float = 1e-13) -> np.ndarray:
    """
    Orthonormalize the unit coefficient vectors in the inner product given by
    a stack of Gram matrices.

    Args:
        gram: Array (M, n, n) of symmetric positive definite Gram matrices
        rel_tol: Relative drop in norm that flags linear dependence

    Returns:
        Coefficients C (M, n, n) with row i holding basis function i

    Raises:
        SingularGram: If a vector collapses under orthogonalization
    """
    m, n, _ = gram.shape
    coeffs = np.broadcast_to(np.eye(n), (m, n, n)).copy()
    for i in range(n):
        initial = np.einsum("ej,ejk,ek->e", coeffs[:, i], gram, coeffs[:, i])
        # two passes keep the k = 3 monomials orthogonal to round-off
        for _ in range(2):
            for j in range(i):
                proj = np.einsum("ej,ejk,ek->e", coeffs[:, i], gram, coeffs[:, j])
                coeffs[:, i] -= proj[:, None] * coeffs[:, j]
        norm2 = np.einsum("ej,ejk,ek->e", coeffs[:, i], gram, coeffs[:, i])
        bad = ~(norm2 > rel_tol * initial)
        if np.any(bad):
            raise SingularGram(
                f"basis function {i} degenerate on {int(bad.sum())} element(s), "
                f"first index {int(np.argmax(bad))}"
            )
        coeffs[:, i] /= np.sqrt(norm2)[:, None]
    return coeffs


def _as_index(elements: Union[int, np.ndarray, None], count: int) -> np.ndarray:
    if elements is None:
        return np.arange(count)
    return np.atleast_1d(np.asarray(elements, dtype=int))


class ElementBasisSet:
    """Orthonormal P_k bases for a stack of triangles."""

    def __init__(self, vertices: np.ndarray, degree: int):
        """
        Build the bases.

        Args:
            vertices: Array (M, 3, 2) of counterclockwise triangle vertices
            degree: Polynomial degree k, 0 <= k <= 3
        """
        if not 0 <= degree <= MAX_DEGREE:
            raise UnsupportedOrder(f"polynomial degree {degree} outside [0, {MAX_DEGREE}]")
        self.degree = degree
        self.dim = dimension(degree)
        self.vertices = np.array(vertices, dtype=float).reshape(-1, 3, 2)
        self.centroids = self.vertices.mean(axis=1)
        edges = self.vertices - np.roll(self.vertices, -1, axis=1)
        self.scales = np.linalg.norm(edges, axis=-1).max(axis=1)

        points, weights = triangle_points(self.vertices, 2 * degree)
        mono = monomial_values(self._local(points, np.arange(len(self.vertices))), degree)
        gram = np.einsum("eq,eqi,eqj->eij", weights, mono, mono)
        self.coefficients = modified_gram_schmidt(gram)
        for arr in (self.vertices, self.centroids, self.scales, self.coefficients):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.vertices)

    def _local(self, points: np.ndarray, index: np.ndarray) -> np.ndarray:
        shape = (-1,) + (1,) * (points.ndim - 2) + (2,)
        c = self.centroids[index].reshape(shape)
        s = self.scales[index].reshape(shape[:-1] + (1,))
        return (points - c) / s

    def eval_basis(self, points: np.ndarray, elements: Union[int, np.ndarray, None] = None) -> np.ndarray:
        """
        Basis values at physical points.

        Args:
            points: Array (P, N, 2), one row of points per selected element
            elements: Element indices (P,); all elements when None

        Returns:
            Array (P, N, dim)
        """
        index = _as_index(elements, len(self))
        points = np.asarray(points, dtype=float)
        mono = monomial_values(self._local(points, index), self.degree)
        return np.einsum("pni,pji->pnj", mono, self.coefficients[index])

    def grad_basis(self, points: np.ndarray, elements: Union[int, np.ndarray, None] = None) -> np.ndarray:
        """Basis gradients at physical points; returns (P, N, dim, 2)."""
        index = _as_index(elements, len(self))
        points = np.asarray(points, dtype=float)
        grads = monomial_gradients(self._local(points, index), self.degree)
        grads = grads / self.scales[index][:, None, None, None]
        return np.einsum("pnid,pji->pnjd", grads, self.coefficients[index])

    def evaluate(
        self, coeffs: np.ndarray, points: np.ndarray, elements: Union[int, np.ndarray, None] = None
    ) -> np.ndarray:
        """
        Evaluate elementwise polynomials.

        Args:
            coeffs: Array (P, dim) or (P, c, dim) of coefficients
            points: Array (P, N, 2)
            elements: Element indices (P,)

        Returns:
            Array (P, N) or (P, N, c)
        """
        phi = self.eval_basis(points, elements)
        if coeffs.ndim == 2:
            return np.einsum("pnj,pj->pn", phi, coeffs)
        return np.einsum("pnj,pcj->pnc", phi, coeffs)

    def element(self, index: int) -> "ElementBasis":
        """Single-element view."""
        return ElementBasis(
            degree=self.degree,
            vertices=self.vertices[index],
            centroid=self.centroids[index],
            scale=float(self.scales[index]),
            coefficients=self.coefficients[index],
        )


@dataclass(frozen=True, eq=False)
class ElementBasis:
    """Orthonormal P_k basis of one triangle; eval works at any physical point."""

    degree: int
    vertices: np.ndarray
    centroid: np.ndarray
    scale: float
    coefficients: np.ndarray

    @classmethod
    def build(cls, vertices: np.ndarray, degree: int) -> "ElementBasis":
        return ElementBasisSet(np.asarray(vertices, dtype=float)[None], degree).element(0)

    @property
    def dim(self) -> int:
        return dimension(self.degree)

    @property
    def jacobian(self) -> np.ndarray:
        return np.column_stack([self.vertices[1] - self.vertices[0], self.vertices[2] - self.vertices[0]])

    @property
    def area(self) -> float:
        return 0.5 * abs(float(np.linalg.det(self.jacobian)))

    def to_physical(self, ref_points: np.ndarray) -> np.ndarray:
        """Affine map from the reference triangle."""
        return self.vertices[0] + np.asarray(ref_points, dtype=float) @ self.jacobian.T

    def eval_basis(self, points: np.ndarray) -> np.ndarray:
        """Basis values (N, dim) at points (N, 2)."""
        xi = (np.atleast_2d(np.asarray(points, dtype=float)) - self.centroid) / self.scale
        return monomial_values(xi, self.degree) @ self.coefficients.T

    def grad_basis(self, points: np.ndarray) -> np.ndarray:
        """Basis gradients (N, dim, 2) at points (N, 2)."""
        xi = (np.atleast_2d(np.asarray(points, dtype=float)) - self.centroid) / self.scale
        grads = monomial_gradients(xi, self.degree) / self.scale
        return np.einsum("nid,ji->njd", grads, self.coefficients)

    def eval(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        return self.eval_basis(points) @ np.asarray(coeffs, dtype=float)

    def grad(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        return np.einsum("njd,j->nd", self.grad_basis(points), np.asarray(coeffs, dtype=float))

    def lagrange_nodes(self) -> np.ndarray:
        """Equispaced nodes of the degree-k principal lattice."""
        k = self.degree
        if k == 0:
            return self.centroid[None, :].copy()
        ref = np.array([(i / k, j / k) for j in range(k + 1) for i in range(k + 1 - j)])
        return self.to_physical(ref)

    def lagrange_values(self, points: np.ndarray) -> np.ndarray:
        """Nodal (Lagrange) basis values (N, dim) at arbitrary points."""
        vander = self.eval_basis(self.lagrange_nodes())
        return np.linalg.solve(vander.T, self.eval_basis(points).T).T


def extrapolate(element: ElementBasis, coeffs: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Value of the element polynomial at p, whether or not p lies in the element."""
    return element.eval(coeffs, p)


def face_basis_values(points: np.ndarray, starts: np.ndarray, ends: np.ndarray, degree: int) -> np.ndarray:
    """
    Orthonormal Legendre face basis at points lying on straight faces.

    Args:
        points: Array (..., N, 2)
        starts: Array (..., 2) of face start vertices
        ends: Array (..., 2) of face end vertices
        degree: Face polynomial degree

    Returns:
        Array (..., N, degree + 1)
    """
    delta = np.asarray(ends, dtype=float) - np.asarray(starts, dtype=float)
    length = np.linalg.norm(delta, axis=-1)
    s = np.einsum("...nd,...d->...n", points - starts[..., None, :], delta) / length[..., None]
    return _legendre_values(s, length[..., None], degree)


def _legendre_values(s: np.ndarray, length: np.ndarray, degree: int) -> np.ndarray:
    vander = legendre.legvander(2.0 * s / length - 1.0, degree)
    return vander * np.sqrt((2.0 * np.arange(degree + 1) + 1.0) / length[..., None])


@dataclass(frozen=True, eq=False)
class FaceBasis:
    """Orthonormal P_k basis on a straight face parametrized by s in [0, h_e]."""

    degree: int
    start: np.ndarray
    end: np.ndarray

    @property
    def dim(self) -> int:
        return self.degree + 1

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.asarray(self.end) - np.asarray(self.start)))

    def eval_param(self, s: np.ndarray) -> np.ndarray:
        """Values (N, dim) at face parameters s in [0, h_e]."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        h = self.length
        vander = legendre.legvander(2.0 * s / h - 1.0, self.degree)
        return vander * np.sqrt((2.0 * np.arange(self.dim) + 1.0) / h)

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Values (N, dim) at physical points on the face."""
        start = np.asarray(self.start, dtype=float)
        delta = np.asarray(self.end, dtype=float) - start
        s = (np.atleast_2d(points) - start) @ delta / self.length
        return self.eval_param(s)

    def point_at(self, s: np.ndarray) -> np.ndarray:
        start = np.asarray(self.start, dtype=float)
        delta = np.asarray(self.end, dtype=float) - start
        return start + np.outer(np.atleast_1d(s) / self.length, delta)

