"""
Tests for the HDG projection, the face L2 projection and the projection
self-checks.
"""
import numpy as np
import pytest

from unfitted_hdg.basis.polynomials import ElementBasis, ElementBasisSet
from unfitted_hdg.core.errors import SingularProjection
from unfitted_hdg.projection.hdg_projector import (
    face_basis_for,
    face_l2_project,
    face_projector_coefficients,
    hdg_project,
    project_fields,
    project_sigma,
    projection_residuals,
)
from unfitted_hdg.verification.projection_checks import (
    random_polynomial_pair,
    random_triangles,
    run_projection_checks,
    smooth_q,
    smooth_u,
)


@pytest.fixture
def triangles(rng):
    return random_triangles(12, rng)


def _points(vertices, count=7):
    bary = np.random.default_rng(5).dirichlet(np.ones(3), size=count)
    return np.einsum("nk,mkd->mnd", bary, vertices)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_polynomials_are_reproduced(triangles, rng, k):
    basis = ElementBasisSet(triangles, k)
    tau = rng.uniform(0.5, 2.0, size=(len(triangles), 3))
    q, u = random_polynomial_pair(k, rng)
    pair = project_fields(basis, tau, q, u)
    pts = _points(triangles)
    assert np.allclose(basis.evaluate(pair.u, pts), u(pts[..., 0], pts[..., 1]), atol=1e-9)
    assert np.allclose(basis.evaluate(pair.q, pts), q(pts[..., 0], pts[..., 1]), atol=1e-9)


@pytest.mark.parametrize("k", [1, 2])
def test_defining_conditions_hold(triangles, rng, k):
    basis = ElementBasisSet(triangles, k)
    tau = rng.uniform(0.5, 2.0, size=(len(triangles), 3))
    pair = project_fields(basis, tau, smooth_q, smooth_u)
    residuals = projection_residuals(basis, tau, pair, smooth_q, smooth_u)
    assert set(residuals) == {"volume_q", "volume_u", "face_flux"}
    assert max(residuals.values()) <= 1e-10


def test_zero_stabilization_is_singular(triangles):
    basis = ElementBasisSet(triangles, 1)
    tau = np.ones((len(triangles), 3))
    tau[4] = 0.0
    with pytest.raises(SingularProjection):
        project_fields(basis, tau, smooth_q, smooth_u)


def test_single_element_projection_matches_the_batch(triangles):
    element = ElementBasis.build(triangles[0], 2)
    single = hdg_project(element, smooth_q, smooth_u, tau=1.5)
    batch = project_fields(ElementBasisSet(triangles[:1], 2), np.full((1, 3), 1.5), smooth_q, smooth_u)
    assert np.allclose(single.q, batch.q[0], atol=1e-13)
    assert np.allclose(single.u, batch.u[0], atol=1e-13)


def test_gradient_projection_of_a_polynomial_is_exact(triangles):
    basis = ElementBasisSet(triangles, 2)

    def u(x, y):
        return x ** 2 - 3 * x * y + y

    def sigma(x, y):
        return np.stack([2 * x - 3 * y, -3 * x + 1.0], axis=-1)

    coeffs = project_sigma(basis, np.ones((len(triangles), 3)), sigma, u)
    pts = _points(triangles)
    assert np.allclose(basis.evaluate(coeffs, pts), sigma(pts[..., 0], pts[..., 1]), atol=1e-9)


def test_face_projection_of_a_constant():
    face = face_basis_for(np.array([0.0, 0.0]), np.array([0.3, 0.4]), 2)
    coeffs = face_l2_project(face, lambda x, y: np.ones_like(x))
    assert coeffs == pytest.approx([np.sqrt(0.5), 0.0, 0.0], abs=1e-14)


def test_face_projection_reproduces_face_polynomials():
    face = face_basis_for(np.array([1.0, -1.0]), np.array([2.0, 1.0]), 2)
    trace = lambda x, y: 1.0 + x * y - y ** 2  # noqa: E731
    coeffs = face_l2_project(face, trace)
    s = np.linspace(0.0, face.length, 6)
    points = face.point_at(s)
    assert np.allclose(face.eval_param(s) @ coeffs, trace(points[:, 0], points[:, 1]), atol=1e-12)


def test_face_projection_of_a_sine_matches_the_normal_equations():
    start, end = np.array([0.2, -0.1]), np.array([1.1, 0.7])
    face = face_basis_for(start, end, 3)
    trace = lambda x, y: np.sin(x + 2.0 * y)  # noqa: E731
    coeffs = face_l2_project(face, trace)

    # normal equations in the monomials of t in [-1, 1]; 21 Gauss points are exact to degree 41
    t, w = np.polynomial.legendre.leggauss(21)
    points = start + np.outer(0.5 * (t + 1.0), end - start)
    monomials = np.vander(t, 4, increasing=True)
    gram = np.einsum("q,qi,qj->ij", w, monomials, monomials)
    moments = np.einsum("q,qi,q->i", w, monomials, trace(points[:, 0], points[:, 1]))
    oracle = np.linalg.solve(gram, moments)

    s = np.linspace(0.0, 1.0, 9)
    expected = np.vander(2.0 * s - 1.0, 4, increasing=True) @ oracle
    assert np.allclose(face.eval_param(s * face.length) @ coeffs, expected, atol=1e-11)


def test_batched_face_projection_matches_single_faces(rng):
    starts = rng.uniform(-1, 1, size=(4, 2))
    ends = starts + rng.uniform(0.1, 0.5, size=(4, 2))
    trace = lambda x, y: np.sin(x) * np.cos(2 * y)  # noqa: E731
    batch = face_projector_coefficients(starts, ends, 3, trace)
    for i in range(4):
        single = face_l2_project(face_basis_for(starts[i], ends[i], 3), trace)
        assert np.allclose(batch[i], single, atol=1e-13)


@pytest.mark.parametrize("k", [0, 1])
def test_projection_self_checks_pass(k):
    checks = run_projection_checks(k, elements=20, fields=2, seed=3)
    assert checks["passed"]
    assert checks["k"] == k
    assert checks["reproduction"] <= 1e-11
    assert checks["rates"]["u"][-1] >= k + 0.8
    assert len(checks["errors"]["h"]) == 3
