"""
Tests for error norms, convergence rates and the acceptance verdict.
"""
import numpy as np
import pytest

from unfitted_hdg.core.errors import ConfigurationError, ZeroError
from unfitted_hdg.core.problem import KappaVariant, LipschitzConstants
from unfitted_hdg.hdg.fields import FrozenFields
from unfitted_hdg.hdg.skeleton import condense_and_solve
from unfitted_hdg.hdg.solution import DiscreteSolution
from unfitted_hdg.projection.hdg_projector import face_projector_coefficients, project_fields, project_sigma
from unfitted_hdg.verification.eoc import eoc, eoc_table, rate
from unfitted_hdg.verification.errors import ErrorReport, compute_errors
from unfitted_hdg.verification.manufactured import make_manufactured
from unfitted_hdg.verification.study import AcceptanceBands, acceptance_verdict, smallness_diagnostics


def _report(h, u, q, **extra):
    values = dict(jump=u, transfer=u, triple=q, lambda_q=q, lambda_u=u)
    values.update(extra)
    return ErrorReport(
        h=h,
        h_max=h,
        k=1,
        n_elements=10,
        dofs=40,
        u=u,
        q=q,
        triple_parts={"q": q ** 2},
        eps_u=0.0,
        eps_q=0.0,
        eps_uhat=0.0,
        I_u=0.0,
        I_q=0.0,
        **values,
    )


def test_exact_polynomial_has_zero_errors(make_disc):
    disc = make_disc(2)
    case = make_manufactured("x**2 - y**2")
    solution = condense_and_solve(disc, FrozenFields.constant(), case.g)
    report = compute_errors(case, solution, disc, 1.0, 1.0)
    for name in ("u", "q", "jump", "transfer", "triple", "lambda_q", "lambda_u", "I_u", "I_q"):
        assert getattr(report, name) < 1e-9, name
    assert report.h == disc.mesh.mesh_size_h
    assert report.sigma is None
    assert "sigma" not in report.norms()


def test_smooth_case_reports_consistent_norms(make_disc):
    disc = make_disc(1)
    case = make_manufactured("exp(x)*sin(y)")
    frozen = FrozenFields(
        kappa_inv_raw=lambda e, p: np.ones(p.shape[:-1]),
        source_raw=lambda e, p: case.f_c(p[..., 0], p[..., 1]),
        kappa_lo=1.0,
        kappa_hi=1.0,
    )
    solution = condense_and_solve(disc, frozen, case.g)
    report = compute_errors(case, solution, disc, 1.0, 1.0, h=0.3, frozen=frozen)
    assert report.h == 0.3
    assert report.h_max == disc.mesh.mesh_size_h
    assert 0 < report.u < 0.05
    assert 0 < report.q < 0.5
    assert set(report.triple_parts) == {"q", "jump", "transfer"}
    assert report.triple == pytest.approx(report.recomputed_triple(), rel=1e-12)
    # error splits into projection error and discrete error
    assert report.u <= report.I_u + report.eps_u + 1e-12
    row = report.row()
    assert row["elements"] == disc.mesh.n_elements
    assert row["dofs"] == disc.n_dofs


def test_gradient_variant_reports_sigma(make_disc):
    disc = make_disc(1)
    case = make_manufactured("x*y", "2 + 1/(1 + sx**2 + sy**2)", KappaVariant.OF_GRAD)
    solution = condense_and_solve(disc, FrozenFields.constant(2.5, 0.0, 2.0, 3.0), case.g, KappaVariant.OF_GRAD)
    report = compute_errors(case, solution, disc, 2.0, 3.0)
    assert report.sigma is not None
    assert report.lambda_sigma is not None
    assert report.sigma_consistency is not None
    assert "sigma" in report.triple_parts
    assert {"sigma", "lambda_sigma"} <= set(report.norms())


def test_rate_arithmetic():
    assert rate(1e-2, 2.5e-3, 0.2, 0.1) == pytest.approx(2.0)
    assert rate(1e-2, 1.25e-3, 0.4, 0.1) == pytest.approx(1.5)


def test_rate_is_undefined_at_machine_zero():
    with pytest.raises(ZeroError):
        rate(1e-3, 1e-15, 0.2, 0.1)


def test_rates_between_levels():
    reports = [_report(0.4, 1.6e-2, 4e-2), _report(0.2, 4e-3, 2e-2), _report(0.1, 1e-3, 1e-2)]
    rates = eoc(reports)
    assert len(rates) == 2
    assert rates[1]["u"] == pytest.approx(2.0)
    assert rates[1]["q"] == pytest.approx(1.0)


def test_exact_norms_get_no_rate():
    reports = [_report(0.2, 1e-16, 1e-2), _report(0.1, 1e-16, 5e-3)]
    rates = eoc(reports)
    assert rates[0]["u"] is None
    assert rates[0]["q"] == pytest.approx(1.0)


def test_rates_need_decreasing_sizes():
    with pytest.raises(ConfigurationError):
        eoc([_report(0.1, 1e-2, 1e-2), _report(0.2, 1e-3, 1e-3)])
    with pytest.raises(ConfigurationError):
        eoc([_report(0.1, 1e-2, 1e-2)])


def test_eoc_table_columns():
    frame = eoc_table([_report(0.2, 4e-3, 2e-2), _report(0.1, 1e-3, 1e-2)])
    assert list(frame["h"]) == [0.2, 0.1]
    assert "rate_u" in frame.columns
    assert "rate_triple" in frame.columns
    assert frame["rate_u"].iloc[1] == pytest.approx(2.0)


def test_acceptance_verdict_bands():
    rates = [{"u": 1.6, "q": 1.1}, {"u": 2.1, "q": 1.95}]
    bands = AcceptanceBands(finest_band=0.2, coarsest_band=0.5)
    verdict = acceptance_verdict(rates, 1, ["u", "q"], bands)
    assert verdict["target"] == 2.0
    assert not verdict["passed"]
    failed = [c for c in verdict["checks"] if not c["ok"]]
    assert [(c["pair"], c["norm"]) for c in failed] == [("coarsest", "q")]

    rates[0]["q"] = 1.6
    assert acceptance_verdict(rates, 1, ["u", "q"], bands)["passed"]


def test_exact_norm_passes_acceptance():
    verdict = acceptance_verdict([{"u": None}, {"u": None}], 2, ["u"], AcceptanceBands())
    assert verdict["passed"]


def test_checked_norms_follow_the_variant():
    bands = AcceptanceBands()
    assert bands.checked_norms(KappaVariant.OF_U) == ["u", "q"]
    assert bands.checked_norms(KappaVariant.OF_GRAD) == ["u", "q", "sigma"]
    assert AcceptanceBands(norms=["triple"]).checked_norms(KappaVariant.OF_U) == ["triple"]


def test_smallness_diagnostics():
    values = smallness_diagnostics(KappaVariant.OF_GRAD, 0.2, 3.0, LipschitzConstants(L_f=0.1))
    assert values["kappa_u"] == pytest.approx(0.1)
    assert values["kappa_grad"] == pytest.approx((16.0 * 9.0 + 40.0) * 0.01)
    of_u = smallness_diagnostics(KappaVariant.OF_U, 0.2, 3.0, LipschitzConstants(L_f=0.1))
    assert of_u["kappa_grad"] is None
    assert smallness_diagnostics(KappaVariant.OF_U, 0.2, 3.0, LipschitzConstants()) == {
        "kappa_u": None,
        "kappa_grad": None,
    }


@pytest.mark.parametrize("variant", [KappaVariant.OF_U, KappaVariant.OF_GRAD])
def test_projected_exact_fields_carry_the_whole_error(make_disc, variant):
    disc = make_disc(1)
    kappa = "2 + sin(u)" if variant is KappaVariant.OF_U else "2 + 1/(1 + sx**2 + sy**2)"
    case = make_manufactured("exp(x)*sin(y)", kappa, variant)
    ends = disc.mesh.face_endpoints
    pair = project_fields(disc.basis, disc.tau_local, case.q, case.u)
    sigma = None
    if variant is KappaVariant.OF_GRAD:
        sigma = project_sigma(disc.basis, disc.tau_local, case.sigma, case.u)
    projected = DiscreteSolution(
        degree=1,
        q=pair.q,
        u=pair.u,
        uhat=face_projector_coefficients(ends[:, 0], ends[:, 1], 1, case.u),
        sigma=sigma,
    )
    report = compute_errors(case, projected, disc, 1.0, 3.0)

    assert report.eps_u <= 1e-10
    assert report.eps_q <= 1e-10
    assert report.eps_uhat <= 1e-10
    assert report.triple_parts["jump"] <= 1e-20
    assert report.I_u == pytest.approx(report.u, rel=1e-12)
    assert report.I_q == pytest.approx(report.q, rel=1e-12)
    assert report.u > 0 and report.q > 0
    if sigma is not None:
        assert report.eps_sigma <= 1e-10
        assert report.I_sigma == pytest.approx(report.sigma, rel=1e-12)
