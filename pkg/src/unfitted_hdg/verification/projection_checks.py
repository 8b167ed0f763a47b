"""
Self-checks of the HDG projection on random elements: defining-condition
residuals, polynomial reproduction and the convergence rate of the
projection error under element scaling.
"""
import logging
from typing import Any, Callable, Dict, List, Tuple

import numpy as np

from ..basis.polynomials import ElementBasisSet, monomial_exponents
from ..basis.quadrature import triangle_points
from ..projection.hdg_projector import project_fields, projection_residuals
from .eoc import rate

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
REPRODUCTION_TOL = 1e-11
SCALES = (0.4, 0.2, 0.1)

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


def random_triangles(count: int, rng: np.random.Generator, min_quality: float = 0.2) -> np.ndarray:
    """
    Random counter-clockwise triangles in [-1, 1]^2 with quality
    4 sqrt(3) |T| / sum(edge^2) above min_quality.
    """
    out: List[np.ndarray] = []
    while len(out) < count:
        v = rng.uniform(-1.0, 1.0, size=(3, 2))
        e1, e2 = v[1] - v[0], v[2] - v[0]
        area = 0.5 * (e1[0] * e2[1] - e1[1] * e2[0])
        if area < 0:
            v = v[[0, 2, 1]]
            area = -area
        edges = np.sum((v[[1, 2, 0]] - v) ** 2)
        if 4.0 * np.sqrt(3.0) * area / edges >= min_quality:
            out.append(v)
    return np.array(out)


def random_polynomial_pair(k: int, rng: np.random.Generator) -> Tuple[Field, Field]:
    """A random vector field in [P_k]^2 and scalar field in P_k."""
    exponents = monomial_exponents(k)
    coeffs = rng.normal(size=(3, len(exponents)))

    def monomials(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.stack([x ** a * y ** b for a, b in exponents], axis=-1)

    def q(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.stack([monomials(x, y) @ coeffs[0], monomials(x, y) @ coeffs[1]], axis=-1)

    def u(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return monomials(x, y) @ coeffs[2]

    return q, u


def smooth_q(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.stack([np.sin(x + 2.0 * y), np.cos(x - y) * np.exp(0.3 * y)], axis=-1)


def smooth_u(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.exp(0.5 * x) * np.sin(y + 0.3)


def _l2_errors(basis: ElementBasisSet, pair: Any, q: Field, u: Field, order: int) -> Tuple[np.ndarray, np.ndarray]:
    pts, w = triangle_points(basis.vertices, order)
    elements = np.arange(len(basis))
    x, y = pts[..., 0], pts[..., 1]
    eq = np.sum(w * np.sum((q(x, y) - basis.evaluate(pair.q, pts, elements)) ** 2, axis=-1), axis=1)
    eu = np.sum(w * (u(x, y) - basis.evaluate(pair.u, pts, elements)) ** 2, axis=1)
    return np.sqrt(eq), np.sqrt(eu)


def run_projection_checks(k: int, elements: int = 100, fields: int = 1, seed: int = 0) -> Dict[str, Any]:
    """
    Exercise the projection on random elements and fields.

    Args:
        k: Polynomial degree
        elements: Number of random elements
        fields: Random polynomial fields per element batch
        seed: Random seed

    Returns:
        Dictionary with residuals, reproduction error, rates and a verdict
    """
    rng = np.random.default_rng(seed)
    tris = random_triangles(elements, rng)
    basis = ElementBasisSet(tris, k)
    tau = rng.uniform(0.5, 2.0, size=(elements, 3))
    order = 2 * k + 4

    pair = project_fields(basis, tau, smooth_q, smooth_u)
    residuals = projection_residuals(basis, tau, pair, smooth_q, smooth_u)

    reproduction = 0.0
    for _ in range(fields):
        q_poly, u_poly = random_polynomial_pair(k, rng)
        poly_pair = project_fields(basis, tau, q_poly, u_poly)
        eq, eu = _l2_errors(basis, poly_pair, q_poly, u_poly, order)
        pts, w = triangle_points(basis.vertices, order)
        scale = np.sqrt(np.sum(w * u_poly(pts[..., 0], pts[..., 1]) ** 2, axis=1)) + 1.0
        reproduction = max(reproduction, float(np.max(np.maximum(eq, eu) / scale)))

    # projection error under scaling of one element about an interior point
    reference = np.array([[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]])
    anchor = np.array([0.2, 0.1])
    errors_q, errors_u = [], []
    for h in SCALES:
        scaled = ElementBasisSet((anchor + h * reference)[None], k)
        scaled_pair = project_fields(scaled, np.ones((1, 3)), smooth_q, smooth_u)
        eq, eu = _l2_errors(scaled, scaled_pair, smooth_q, smooth_u, order)
        area = 0.5 * h * h * 0.8
        errors_q.append(float(eq[0] / np.sqrt(area)))
        errors_u.append(float(eu[0] / np.sqrt(area)))
    rates = {
        "q": [rate(errors_q[i], errors_q[i + 1], SCALES[i], SCALES[i + 1]) for i in range(len(SCALES) - 1)],
        "u": [rate(errors_u[i], errors_u[i + 1], SCALES[i], SCALES[i + 1]) for i in range(len(SCALES) - 1)],
    }

    passed = (
        max(residuals.values()) <= RESIDUAL_TOL
        and reproduction <= REPRODUCTION_TOL
        and min(rates["q"][-1], rates["u"][-1]) >= k + 0.8
    )
    logger.info(f"Projection checks k={k}: residual {max(residuals.values()):.2e}, reproduction {reproduction:.2e}")
    return {
        "k": k,
        "elements": elements,
        "seed": seed,
        "residuals": residuals,
        "reproduction": reproduction,
        "errors": {"h": list(SCALES), "q": errors_q, "u": errors_u},
        "rates": rates,
        "passed": bool(passed),
    }
