"""
Tests for the Picard drivers and the coarse-to-fine prolongation.
"""
import json

import numpy as np
import pytest

from unfitted_hdg.core.errors import ConfigurationError, DivergenceDetected, MaxItersExceeded
from unfitted_hdg.core.problem import KappaVariant, ProblemSpec
from unfitted_hdg.hdg.discretization import HDGDiscretization
from unfitted_hdg.mesh.generator import build_admissible_mesh
from unfitted_hdg.mesh.transfer import build_transfer_data
from unfitted_hdg.nonlinear.picard import (
    IterationTrace,
    PicardOptions,
    boundary_data_smallness,
    prolongate_iterate,
    solve,
    solve_kappa_grad,
    solve_kappa_u,
)
from unfitted_hdg.verification.errors import compute_errors
from unfitted_hdg.verification.manufactured import make_manufactured


def _linear_problem(k=1, source=lambda x, y, u: np.zeros_like(u), g=lambda x, y: x - y):
    return ProblemSpec(
        kappa_variant=KappaVariant.OF_U,
        kappa=lambda u: np.ones_like(u),
        kappa_lo=1.0,
        kappa_hi=1.0,
        source=source,
        g=g,
        degree=k,
    )


def _relative_l2(disc, coeffs, exact):
    values = disc.basis.evaluate(coeffs, disc.vol_points)
    target = exact(disc.vol_points[..., 0], disc.vol_points[..., 1])
    error = np.sum(disc.vol_weights * (values - target) ** 2)
    return float(np.sqrt(error / np.sum(disc.vol_weights * target ** 2)))


def test_coefficient_independent_problem_converges_at_once(make_disc):
    disc = make_disc(1)
    solution, trace = solve(_linear_problem(), disc)
    assert trace.converged
    assert trace.iterations == 2
    assert trace.relative_increments[-1] <= 1e-10
    assert len(trace.ratios) == 1


def test_kappa_of_u_converges_to_manufactured_solution(make_disc):
    disc = make_disc(1)
    case = make_manufactured("exp(x)*sin(y)", "2 + sin(u)")
    problem = case.to_problem(1, 1.0, 3.0)
    solution, trace = solve_kappa_u(problem, disc, PicardOptions(tol=1e-8, max_iters=60))
    assert trace.converged
    assert trace.iterations <= 60
    assert _relative_l2(disc, solution.u, case.u) < 0.05
    assert trace.diagnostics["boundary_data_smallness"] > 0
    assert trace.diagnostics["L_hat_times_smallness"] is None


def test_kappa_of_gradient_converges(make_disc):
    disc = make_disc(1)
    case = make_manufactured("x*y + 0.5*x", "2 + 1/(1 + sx**2 + sy**2)", KappaVariant.OF_GRAD)
    problem = case.to_problem(1, 2.0, 3.0)
    solution, trace = solve_kappa_grad(problem, disc, PicardOptions(tol=1e-9, max_iters=60))
    assert trace.converged
    assert solution.sigma is not None
    assert len(trace.sigma_increments) == trace.iterations
    assert _relative_l2(disc, solution.u, case.u) < 0.05


def test_sustained_growth_is_reported_as_divergence(make_disc):
    disc = make_disc(1)
    problem = _linear_problem(source=lambda x, y, u: 1000.0 * u + 1.0, g=lambda x, y: np.zeros_like(x))
    with pytest.raises(DivergenceDetected) as info:
        solve_kappa_u(problem, disc)
    assert isinstance(info.value, MaxItersExceeded)
    trace = info.value.trace
    assert trace.iterations >= 4
    assert not trace.converged
    assert all(r >= 10.0 for r in trace.ratios[-3:])


def test_iteration_limit_raises_with_trace(make_disc):
    disc = make_disc(1)
    problem = make_manufactured("exp(x)*sin(y)", "2 + sin(u)").to_problem(1, 1.0, 3.0)
    with pytest.raises(MaxItersExceeded) as info:
        solve_kappa_u(problem, disc, PicardOptions(tol=1e-14, max_iters=2))
    assert not isinstance(info.value, DivergenceDetected)
    assert info.value.trace.iterations == 2


def test_relaxed_iteration_still_converges(make_disc):
    disc = make_disc(1)
    _, plain = solve(_linear_problem(), disc)
    _, relaxed = solve(_linear_problem(), disc, PicardOptions(relaxation=0.5, tol=1e-8))
    assert relaxed.converged
    assert relaxed.iterations > plain.iterations


def test_drivers_reject_the_other_variant(make_disc):
    disc = make_disc(1)
    with pytest.raises(ConfigurationError):
        solve_kappa_grad(_linear_problem(), disc)


@pytest.mark.parametrize(
    "kwargs",
    [{"tol": 0.0}, {"relaxation": 0.0}, {"relaxation": 1.5}, {"max_iters": 0}],
)
def test_invalid_options_are_rejected(kwargs):
    with pytest.raises(ConfigurationError):
        PicardOptions(**kwargs)


def test_options_from_settings_ignore_unknown_keys():
    opts = PicardOptions.from_settings({"tol": 1e-8, "max_iters": 7, "color": "red"}, residual_tol=1e-6)
    assert opts.tol == 1e-8
    assert opts.max_iters == 7
    assert opts.residual_tol == 1e-6


def test_divergence_needs_three_consecutive_tenfold_steps():
    trace = IterationTrace(variant="of-u")
    for value in (1.0, 20.0, 400.0):
        trace.record(value, 1.0, 0)
    assert not trace.diverging()
    trace.record(8000.0, 1.0, 0)
    assert trace.diverging()

    calm = IterationTrace(variant="of-u")
    for value in (1.0, 20.0, 400.0, 100.0):
        calm.record(value, 1.0, 0)
    assert not calm.diverging()


def test_trace_serializes(tmp_path):
    trace = IterationTrace(variant="of-grad")
    trace.record(1e-3, 1e-2, 4)
    path = trace.to_json(tmp_path / "trace.json")
    data = json.loads(path.read_text())
    assert data["variant"] == "of-grad"
    assert data["clamp_events"] == [4]
    assert data["iterations"] == 1


def test_prolongation_reproduces_linear_fields(make_disc):
    coarse, fine = make_disc(1), make_disc(2)
    linear = lambda x, y: 1.0 + 2.0 * x - 0.5 * y  # noqa: E731
    moments = np.einsum(
        "eq,eqi,eq->ei",
        coarse.vol_weights,
        coarse.phi,
        linear(coarse.vol_points[..., 0], coarse.vol_points[..., 1]),
    )
    coeffs = np.linalg.solve(coarse.mass, moments[..., None])[..., 0]
    fine_coeffs = prolongate_iterate(coarse, coeffs, fine)
    assert fine_coeffs.shape == (fine.mesh.n_elements, fine.n)
    assert _relative_l2(fine, fine_coeffs, linear) < 1e-10

    vector = np.stack([coeffs, 2.0 * coeffs], axis=1)
    fine_vector = prolongate_iterate(coarse, vector, fine)
    assert fine_vector.shape == (fine.mesh.n_elements, 2, fine.n)
    assert np.allclose(fine_vector[:, 1], 2.0 * fine_coeffs, atol=1e-10)


def test_boundary_data_smallness(make_disc):
    disc = make_disc(1)
    assert boundary_data_smallness(disc, lambda x, y: np.zeros_like(x)) == 0.0
    one = boundary_data_smallness(disc, lambda x, y: np.ones_like(x))
    two = boundary_data_smallness(disc, lambda x, y: 2.0 * np.ones_like(x))
    assert one > 0
    assert two == pytest.approx(2.0 * one)


def test_variants_agree_for_unit_diffusivity(make_disc):
    disc = make_disc(1)
    common = dict(
        kappa_lo=1.0,
        kappa_hi=1.0,
        source=lambda x, y, u: 1.0 + 0.2 * np.sin(u),
        g=lambda x, y: np.cos(x) * y,
        degree=1,
    )
    of_u = ProblemSpec(kappa_variant=KappaVariant.OF_U, kappa=lambda u: np.ones_like(u), **common)
    of_grad = ProblemSpec(kappa_variant=KappaVariant.OF_GRAD, kappa=lambda sx, sy: np.ones_like(sx), **common)
    opts = PicardOptions(tol=1e-13, max_iters=60)

    scalar, _ = solve_kappa_u(of_u, disc, opts)
    gradient, _ = solve_kappa_grad(of_grad, disc, opts)
    assert np.allclose(scalar.u, gradient.u, atol=1e-9)
    assert np.allclose(scalar.q, gradient.q, atol=1e-9)
    assert np.allclose(scalar.uhat, gradient.uhat, atol=1e-9)
    assert np.allclose(gradient.sigma, -gradient.q, atol=1e-9)


def test_sigma_and_discrete_gradient_approach_each_other(make_disc, disk_mesh, unit_circle):
    case = make_manufactured("sin(x)*exp(y)", "2 + 1/(1 + sx**2 + sy**2)", KappaVariant.OF_GRAD)
    problem = case.to_problem(1, 2.0, 3.0)
    opts = PicardOptions(tol=1e-10, max_iters=80)
    fine_mesh = build_admissible_mesh(unit_circle, 0.15)
    fine = HDGDiscretization(fine_mesh, build_transfer_data(fine_mesh, unit_circle, 4), 1)

    gaps = []
    for disc in (make_disc(1), fine):
        solution, _ = solve_kappa_grad(problem, disc, opts)
        gaps.append(compute_errors(case, solution, disc, 2.0, 3.0).sigma_consistency)
    assert gaps[1] < 0.7 * gaps[0]


@pytest.mark.parametrize("variant", [KappaVariant.OF_U, KappaVariant.OF_GRAD])
def test_full_residual_check_runs_inside_the_iteration(make_disc, variant):
    disc = make_disc(1)
    kappa = "2 + sin(u)" if variant is KappaVariant.OF_U else "2 + 1/(1 + sx**2 + sy**2)"
    problem = make_manufactured("x*y + 0.5*x", kappa, variant).to_problem(1, 1.0, 3.0)
    opts = PicardOptions.from_settings({"tol": 1e-9, "max_iters": 60, "check_full_residual": True})
    solution, trace = solve(problem, disc, opts)
    assert opts.check_full_residual
    assert trace.converged
    assert solution.residual < 1e-9
