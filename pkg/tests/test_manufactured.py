"""
Tests for manufactured solutions.
"""
import numpy as np
import pytest

from unfitted_hdg.core.errors import ExpressionError, NonDifferentiable
from unfitted_hdg.core.problem import KappaVariant
from unfitted_hdg.verification.manufactured import make_manufactured


@pytest.fixture
def disk_points(rng):
    radius = np.sqrt(rng.uniform(0, 1, 200))
    angle = rng.uniform(0, 2 * np.pi, 200)
    return radius * np.cos(angle), radius * np.sin(angle)


def test_compensating_source_of_a_quadratic():
    case = make_manufactured("x**2 + y**2")
    x = np.array([0.1, -0.4, 0.7])
    y = np.array([0.2, 0.5, -0.3])
    assert np.allclose(case.f_c(x, y), -4.0)
    assert np.allclose(case.q(x, y), np.stack([-2 * x, -2 * y], axis=-1))
    assert np.allclose(case.g(x, y), x ** 2 + y ** 2)


@pytest.mark.parametrize(
    "u_text, kappa_text, variant, f0_text",
    [
        ("exp(x)*sin(y)", "2 + sin(u)", KappaVariant.OF_U, "0"),
        ("sin(pi*x)*sin(pi*y)", "2 + 1/(1 + sx**2 + sy**2)", KappaVariant.OF_GRAD, "0"),
        ("cos(x*y)", "1 + u**2", KappaVariant.OF_U, "1 - 0.1*sin(u)"),
    ],
)
def test_manufactured_solution_satisfies_the_equation(disk_points, u_text, kappa_text, variant, f0_text):
    case = make_manufactured(u_text, kappa_text, variant, f0_text)
    x, y = disk_points
    assert np.max(np.abs(case.pde_residual(x, y))) < 1e-5


def test_solution_dependent_source_is_split(disk_points):
    case = make_manufactured("x + y", "1", KappaVariant.OF_U, "u**2")
    x, y = disk_points
    u = case.u(x, y)
    # linear u with unit diffusivity: div q = 0, so f_c = -f0(u*)
    assert np.allclose(case.f_c(x, y), -(u ** 2))
    assert np.allclose(case.source(x, y, u), 0.0)


def test_gradient_variant_derivatives(disk_points):
    case = make_manufactured("x**2*y", "2 + 1/(1 + sx**2 + sy**2)", KappaVariant.OF_GRAD)
    x, y = disk_points
    assert np.allclose(case.sigma(x, y), np.stack([2 * x * y, x ** 2], axis=-1))
    hessian = case.sigma_jacobian(x, y)
    assert hessian.shape == (len(x), 2, 2)
    assert np.allclose(hessian[:, 0, 1], 2 * x)
    assert np.allclose(hessian[:, 1, 1], 0.0)
    kappa = case.kappa(case.sigma(x, y)[:, 0], case.sigma(x, y)[:, 1])
    assert np.all((kappa > 2.0) & (kappa <= 3.0))


def test_problem_from_case(disk_points):
    case = make_manufactured("exp(x)*sin(y)", "2 + sin(u)")
    problem = case.to_problem(2, 1.0, 3.0, tau=2.0)
    x, y = disk_points
    assert problem.degree == 2
    assert problem.tau_bar == 2.0
    assert np.allclose(problem.g(x, y), case.u(x, y))


def test_non_smooth_solution_is_rejected():
    with pytest.raises(NonDifferentiable):
        make_manufactured("abs(x) + y")


def test_unknown_symbols_are_rejected():
    with pytest.raises(ExpressionError):
        make_manufactured("exp(z)")
    with pytest.raises(ExpressionError):
        make_manufactured("x", "1 + sx", KappaVariant.OF_U)
