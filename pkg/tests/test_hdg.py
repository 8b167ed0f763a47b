"""
Tests for the linearized HDG step: polynomial exactness with transferred
boundary data, local conservation and agreement of the condensed and
monolithic solves.
"""
import numpy as np
import pytest

from unfitted_hdg.basis.polynomials import FaceBasis
from unfitted_hdg.core.errors import ConfigurationError, SolverFailure
from unfitted_hdg.core.problem import KappaVariant
from unfitted_hdg.hdg.discretization import HDGDiscretization
from unfitted_hdg.hdg.fields import FrozenFields
from unfitted_hdg.hdg.local import (
    assemble_local,
    assemble_local_gradient_variant,
    transfer_coupling,
    transfer_couplings,
)
from unfitted_hdg.hdg.monolithic import monolithic_residual, solve_monolithic
from unfitted_hdg.hdg.skeleton import (
    build_skeleton_system,
    condense_and_solve,
    dump_skeleton,
    local_conservation_residuals,
)
from unfitted_hdg.mesh.transfer import build_transfer_data

EXACT_TOL = 1e-8


def _fields(disc, solution):
    u = disc.basis.evaluate(solution.u, disc.vol_points)
    q = disc.basis.evaluate(solution.q, disc.vol_points)
    return disc.vol_points[..., 0], disc.vol_points[..., 1], u, q


@pytest.mark.parametrize(
    "k, u_exact, grad_exact, source",
    [
        (1, lambda x, y: 1 + x + 2 * y, lambda x, y: (np.ones_like(x), 2 * np.ones_like(y)), 0.0),
        (2, lambda x, y: x ** 2 - y ** 2, lambda x, y: (2 * x, -2 * y), 0.0),
        (2, lambda x, y: 1 - (x ** 2 + y ** 2) / 4, lambda x, y: (-x / 2, -y / 2), 1.0),
    ],
)
def test_polynomials_of_degree_k_are_reproduced(make_disc, k, u_exact, grad_exact, source):
    disc = make_disc(k)
    solution = condense_and_solve(disc, FrozenFields.constant(1.0, source), u_exact)
    x, y, u, q = _fields(disc, solution)
    gx, gy = grad_exact(x, y)
    assert np.max(np.abs(u - u_exact(x, y))) < EXACT_TOL
    assert np.max(np.abs(q[..., 0] + gx)) < EXACT_TOL
    assert np.max(np.abs(q[..., 1] + gy)) < EXACT_TOL
    assert solution.residual < 1e-9


def test_gradient_variant_reproduces_linear_fields(make_disc):
    disc = make_disc(1)
    g = lambda x, y: 0.5 - x + 3 * y  # noqa: E731
    solution = condense_and_solve(disc, FrozenFields.constant(), g, KappaVariant.OF_GRAD)
    assert solution.sigma is not None
    sigma = disc.basis.evaluate(solution.sigma, disc.vol_points)
    x, y, u, q = _fields(disc, solution)
    assert np.max(np.abs(u - g(x, y))) < EXACT_TOL
    assert np.allclose(sigma[..., 0], -1.0, atol=EXACT_TOL)
    assert np.allclose(sigma[..., 1], 3.0, atol=EXACT_TOL)
    assert np.allclose(q, -sigma, atol=EXACT_TOL)


def test_traces_match_boundary_data_on_boundary_faces(make_disc):
    disc = make_disc(1)
    g = lambda x, y: 2.0 - x + y  # noqa: E731
    solution = condense_and_solve(disc, FrozenFields.constant(), g)
    face = int(disc.mesh.boundary_faces[0])
    start, end = disc.mesh.face_endpoints[face]
    midpoint = 0.5 * (start + end)
    length = disc.mesh.face_lengths[face]
    # the constant mode of the orthonormal face basis is 1 / sqrt(length)
    mean = solution.uhat[face, 0] / np.sqrt(length)
    assert mean == pytest.approx(g(*midpoint), abs=EXACT_TOL)


def test_local_conservation_holds(make_disc):
    disc = make_disc(2)
    frozen = FrozenFields(
        kappa_inv_raw=lambda e, p: 1.0 / (2.0 + p[..., 0] ** 2),
        source_raw=lambda e, p: np.sin(p[..., 1]) + 1.0,
        kappa_lo=2.0,
        kappa_hi=3.0,
    )
    solution = condense_and_solve(disc, frozen, lambda x, y: np.cos(x) * y)
    residuals = local_conservation_residuals(disc, frozen, solution)
    assert residuals.shape == (disc.mesh.n_elements,)
    assert residuals.max() < 1e-10


@pytest.mark.parametrize("variant", [KappaVariant.OF_U, KappaVariant.OF_GRAD])
def test_condensed_and_monolithic_solves_agree(make_disc, variant):
    disc = make_disc(1)
    frozen = FrozenFields(
        kappa_inv_raw=lambda e, p: 1.0 / (2.0 + p[..., 0] ** 2),
        source_raw=lambda e, p: np.exp(p[..., 0]),
        kappa_lo=2.0,
        kappa_hi=3.0,
    )
    g = lambda x, y: x * y + 1.0  # noqa: E731
    condensed = condense_and_solve(disc, frozen, g, variant)
    monolithic = solve_monolithic(disc, frozen, g, variant)
    assert np.allclose(condensed.u, monolithic.u, atol=1e-9)
    assert np.allclose(condensed.q, monolithic.q, atol=1e-9)
    assert np.allclose(condensed.uhat, monolithic.uhat, atol=1e-9)
    assert monolithic_residual(disc, frozen, g, condensed, variant) < 1e-11


def test_transfer_coupling_of_one_face_matches_the_batch(make_disc):
    disc = make_disc(1)
    frozen = FrozenFields.constant()
    g = lambda x, y: x + 0.0 * y  # noqa: E731
    P, rhs = transfer_couplings(disc, frozen, g)
    assert P.shape == (len(disc.mesh.boundary_faces), disc.nf, 2 * disc.n)
    face = int(disc.boundary_order[3])
    block, moments = transfer_coupling(disc, frozen, g, face)
    assert np.array_equal(block, P[3])
    assert np.array_equal(moments, rhs[3])


def test_skeleton_matrix_dump(make_disc, tmp_path):
    disc = make_disc(0)
    system, _ = build_skeleton_system(disc, FrozenFields.constant(), lambda x, y: x)
    path = dump_skeleton(system, tmp_path / "skeleton.txt", "config-sha256: abc")
    lines = path.read_text().splitlines()
    assert lines[0] == "# config-sha256: abc"
    assert lines[1] == f"# {system.n_dofs} {system.n_dofs} {system.matrix.nnz}"
    assert len(lines) == 2 + system.matrix.tocoo().nnz


def test_non_positive_stabilization_is_rejected(disk_mesh, disk_transfer):
    with pytest.raises(ConfigurationError):
        HDGDiscretization(disk_mesh, disk_transfer, 1, tau=0.0)
    with pytest.raises(ConfigurationError):
        HDGDiscretization(disk_mesh, disk_transfer, 1, tau=1.0, tau_boundary=-1.0)


def test_missing_transfer_data_is_rejected(disk_mesh):
    with pytest.raises(ConfigurationError):
        HDGDiscretization(disk_mesh, {}, 1)


def test_clamped_diffusivity_is_counted():
    frozen = FrozenFields(
        kappa_inv_raw=lambda e, p: np.full(p.shape[:-1], 10.0),
        source_raw=lambda e, p: np.zeros(p.shape[:-1]),
        kappa_lo=1.0,
        kappa_hi=2.0,
    )
    values = frozen.kappa_inv_at(np.arange(2), np.zeros((2, 3, 2)))
    assert np.all(values == 1.0)
    assert frozen.clamp_events == 6


def test_weighted_mass_block_scales_with_kappa_inverse(make_disc):
    disc = make_disc(1)
    n = disc.n
    unit = assemble_local(disc, FrozenFields.constant(1.0))
    quarter = assemble_local(disc, FrozenFields.constant(0.25))

    assert np.allclose(quarter.K[:, :n, :n], 4.0 * unit.K[:, :n, :n], atol=1e-12)
    assert np.allclose(quarter.K[:, n : 2 * n, n : 2 * n], 4.0 * unit.K[:, n : 2 * n, n : 2 * n], atol=1e-12)
    assert np.allclose(quarter.K[:, 2 * n :, :], unit.K[:, 2 * n :, :])
    assert unit.size == 3 * n
    assert unit.variant is KappaVariant.OF_U


def test_gradient_variant_couples_sigma_through_kappa(make_disc):
    disc = make_disc(1)
    n = disc.n
    local = assemble_local_gradient_variant(disc, FrozenFields.constant(2.0))

    assert local.size == 5 * n
    assert local.sigma == slice(0, 2 * n)
    assert np.allclose(local.K[:, 2 * n : 3 * n, :n], 2.0 * disc.mass, atol=1e-12)
    assert np.allclose(local.K[:, :n, :n], disc.mass)


def test_transfer_coupling_matches_simpson_path_integration(make_disc):
    disc = make_disc(1)
    flux = lambda x, y: np.stack([0.3 + 2.0 * x - y, -1.0 + 0.5 * x + 1.5 * y], axis=-1)  # noqa: E731
    steps = 10_000
    simpson = np.ones(steps + 1)
    simpson[1:-1:2], simpson[2:-1:2] = 4.0, 2.0
    P, _ = transfer_couplings(disc, FrozenFields.constant(), lambda x, y: np.zeros_like(x))

    for row, face in enumerate(disc.boundary_order):
        data = disc.transfer[int(face)]
        e = data.element
        pts = disc.vol_points[e]
        coeffs = np.einsum("q,qi,qd->di", disc.vol_weights[e], disc.phi[e], flux(pts[:, 0], pts[:, 1]))

        s = data.lengths[:, None] * np.linspace(0.0, 1.0, steps + 1)[None, :]
        path = data.points[:, None, :] + s[..., None] * data.normal
        integrand = flux(path[..., 0], path[..., 1]) @ data.normal
        integrals = data.lengths / (3.0 * steps) * (integrand @ simpson)
        psi = FaceBasis(1, data.start, data.end).eval(data.points)
        expected = np.einsum("q,q,qm->m", data.weights, integrals, psi)

        assert np.allclose(P[row] @ coeffs.ravel(), expected, atol=1e-10)


def test_transfer_integrals_are_settled_at_the_default_order(disk_mesh, unit_circle, make_disc):
    default = make_disc(2)
    refined = HDGDiscretization(disk_mesh, build_transfer_data(disk_mesh, unit_circle, 8), 2)
    frozen = FrozenFields(
        kappa_inv_raw=lambda e, p: 1.0 / (2.0 + p[..., 0] ** 2),
        source_raw=lambda e, p: np.zeros(p.shape[:-1]),
        kappa_lo=2.0,
        kappa_hi=3.0,
    )
    g = lambda x, y: np.exp(x) * np.sin(y)  # noqa: E731
    P_default, rhs_default = transfer_couplings(default, frozen, g)
    P_refined, rhs_refined = transfer_couplings(refined, frozen, g)
    assert np.array_equal(default.boundary_order, refined.boundary_order)
    assert np.abs(rhs_refined - rhs_default).max() < 1e-10
    assert np.abs(P_refined - P_default).max() < 1e-10


def test_constant_frozen_kappa_scales_the_recovered_flux(make_disc):
    disc = make_disc(1)
    g = lambda x, y: np.sin(x) + y  # noqa: E731
    solution = condense_and_solve(disc, FrozenFields.constant(2.0, 1.0), g, KappaVariant.OF_GRAD)
    scale = max(1.0, np.abs(solution.sigma).max())
    assert np.allclose(solution.q, -2.0 * solution.sigma, rtol=0.0, atol=1e-10 * scale)


@pytest.mark.parametrize("variant", [KappaVariant.OF_U, KappaVariant.OF_GRAD])
def test_full_residual_check_reports_the_uncondensed_residual(make_disc, variant):
    disc = make_disc(1)
    frozen = FrozenFields(
        kappa_inv_raw=lambda e, p: 1.0 / (2.0 + p[..., 1] ** 2),
        source_raw=lambda e, p: np.cos(p[..., 0]),
        kappa_lo=2.0,
        kappa_hi=3.0,
    )
    g = lambda x, y: np.exp(x) - y  # noqa: E731
    plain = condense_and_solve(disc, frozen, g, variant)
    checked = condense_and_solve(disc, frozen, g, variant, check_full_residual=True)

    assert np.array_equal(checked.uhat, plain.uhat)
    assert checked.residual == pytest.approx(monolithic_residual(disc, frozen, g, plain, variant))
    assert checked.residual < 1e-9


def test_full_residual_check_rejects_an_inconsistent_solve(make_disc, monkeypatch):
    disc = make_disc(1)
    monkeypatch.setattr("unfitted_hdg.hdg.monolithic.monolithic_residual", lambda *args: 1e-3)
    with pytest.raises(SolverFailure, match="uncondensed residual"):
        condense_and_solve(disc, FrozenFields.constant(), lambda x, y: x * y, check_full_residual=True)
