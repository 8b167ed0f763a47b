"""
Mesh-dependent error norms, triple norms and projection-error diagnostics.

Errors are split as exact - discrete = (exact - Pi) + (Pi - discrete):
I-quantities are exact minus the HDG projection, eps-quantities the
projection minus the discrete solution. eps^uhat uses the face L2
projection of u*.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from ..basis.quadrature import MAX_ORDER, segment_points, triangle_points
from ..basis.polynomials import face_basis_values
from ..core.problem import KappaVariant
from ..hdg.discretization import HDGDiscretization
from ..hdg.fields import FrozenFields
from ..hdg.solution import DiscreteSolution
from ..projection.hdg_projector import face_projector_coefficients, project_fields, project_sigma
from .manufactured import ManufacturedCase

logger = logging.getLogger(__name__)

NORM_COLUMNS = ("u", "q", "sigma", "jump", "transfer", "triple", "lambda_q", "lambda_u", "lambda_sigma")


@dataclass(frozen=True)
class ErrorReport:
    """Errors of one discrete solution against a manufactured case."""

    h: float
    h_max: float
    k: int
    n_elements: int
    dofs: int
    u: float
    q: float
    jump: float
    transfer: float
    triple: float
    triple_parts: Dict[str, float]
    lambda_q: float
    lambda_u: float
    eps_u: float
    eps_q: float
    eps_uhat: float
    I_u: float
    I_q: float
    sigma: Optional[float] = None
    lambda_sigma: Optional[float] = None
    eps_sigma: Optional[float] = None
    I_sigma: Optional[float] = None
    sigma_consistency: Optional[float] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    def norms(self) -> Dict[str, float]:
        """The quantities tracked across a mesh sequence (absent ones omitted)."""
        values = {name: getattr(self, name) for name in NORM_COLUMNS}
        return {name: float(v) for name, v in values.items() if v is not None}

    def recomputed_triple(self) -> float:
        return float(np.sqrt(sum(self.triple_parts.values())))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def row(self) -> Dict[str, Any]:
        """Flat record for tabular output."""
        row: Dict[str, Any] = {"h": self.h, "h_max": self.h_max, "k": self.k, "elements": self.n_elements, "dofs": self.dofs}
        row.update(self.norms())
        return row


def _sqrt(value: float) -> float:
    return float(np.sqrt(max(value, 0.0)))


def _frozen_at_solution(case: ManufacturedCase, disc: HDGDiscretization, sol: DiscreteSolution, lo: float, hi: float) -> FrozenFields:
    if case.kappa_variant is KappaVariant.OF_GRAD and sol.sigma is not None:
        return FrozenFields.from_gradient_iterate(disc.basis, sol.sigma, sol.u, case.kappa, case.source, lo, hi)
    return FrozenFields.from_scalar_iterate(disc.basis, sol.u, case.kappa, case.source, lo, hi)


def compute_errors(
    case: ManufacturedCase,
    sol: DiscreteSolution,
    disc: HDGDiscretization,
    kappa_lo: float,
    kappa_hi: float,
    h: Optional[float] = None,
    frozen: Optional[FrozenFields] = None,
) -> ErrorReport:
    """
    Error norms of a discrete solution against the manufactured case.

    Args:
        case: Manufactured case
        sol: Discrete solution on disc
        disc: Discretization the solution lives on
        kappa_lo: Lower diffusivity bound (for clamping the iterate)
        kappa_hi: Upper diffusivity bound
        h: Size measure recorded for convergence rates (mesh h when None)
        frozen: Coefficients at the iterate; rebuilt from sol when None

    Returns:
        ErrorReport
    """
    mesh = disc.mesh
    k = disc.k
    m = mesh.n_elements
    elements = np.arange(m)
    basis = disc.basis
    frozen = frozen or _frozen_at_solution(case, disc, sol, kappa_lo, kappa_hi)
    gradient_variant = sol.sigma is not None
    order = min(2 * k + 4, MAX_ORDER)

    pair = project_fields(basis, disc.tau_local, case.q, case.u)
    pi_sigma = project_sigma(basis, disc.tau_local, case.sigma, case.u) if gradient_variant else None
    pm_u = face_projector_coefficients(mesh.face_endpoints[:, 0], mesh.face_endpoints[:, 1], k, case.u)

    # element volumes
    pts, w = triangle_points(mesh.element_vertices, order)
    x, y = pts[..., 0], pts[..., 1]
    u_ex, q_ex = case.u(x, y), case.q(x, y)
    u_h, q_h = basis.evaluate(sol.u, pts, elements), basis.evaluate(sol.q, pts, elements)
    pi_u, pi_q = basis.evaluate(pair.u, pts, elements), basis.evaluate(pair.q, pts, elements)
    kappa_h = frozen.kappa_at(elements, pts)

    def vol(values: np.ndarray, weight: Optional[np.ndarray] = None) -> float:
        sq = values ** 2 if values.ndim == 2 else np.sum(values ** 2, axis=-1)
        return float(np.sum(w * sq * (1.0 if weight is None else weight)))

    u_err, q_err = vol(u_ex - u_h), vol(q_ex - q_h)
    eps_u, eps_q = vol(pi_u - u_h), vol(pi_q - q_h)
    I_u, I_q = vol(u_ex - pi_u), vol(q_ex - pi_q)
    sigma_terms: Dict[str, float] = {}
    if gradient_variant:
        s_ex = case.sigma(x, y)
        s_h = basis.evaluate(sol.sigma, pts, elements)
        pi_s = basis.evaluate(pi_sigma, pts, elements)
        grad_u_h = np.einsum("ej,eqjd->eqd", sol.u, basis.grad_basis(pts, elements))
        sigma_terms = {
            "sigma": vol(s_ex - s_h),
            "eps_sigma": vol(pi_s - s_h),
            "I_sigma": vol(s_ex - pi_s),
            "consistency": vol(s_h - grad_u_h),
        }
        eps_q_weighted = vol(pi_q - q_h, kappa_h)
    else:
        eps_q_weighted = vol(pi_q - q_h, 1.0 / kappa_h)

    # element boundaries
    starts = mesh.element_vertices
    ends = starts[:, [1, 2, 0]]
    fpts, fw = segment_points(starts, ends, order)
    nq = fpts.shape[2]
    flat = fpts.reshape(m, 3 * nq, 2)
    u_h_face = basis.evaluate(sol.u, flat, elements).reshape(m, 3, nq)
    pi_u_face = basis.evaluate(pair.u, flat, elements).reshape(m, 3, nq)
    global_ends = mesh.face_endpoints[mesh.element_faces]
    psi = face_basis_values(fpts, global_ends[..., 0, :], global_ends[..., 1, :], k)
    uhat = np.einsum("efqm,efm->efq", psi, sol.uhat[mesh.element_faces])
    pm_face = np.einsum("efqm,efm->efq", psi, pm_u[mesh.element_faces])
    tau_w = fw * disc.tau_local[..., None]
    jump = float(np.sum(tau_w * (u_h_face - uhat) ** 2))
    jump_eps = float(np.sum(tau_w * ((pi_u_face - u_h_face) - (pm_face - uhat)) ** 2))
    eps_uhat = float(np.sum(fw * (pm_face - uhat) ** 2))

    # computational boundary and extension patches
    transfer_sq = 0.0
    gamma_q = gamma_u = gamma_s = 0.0
    patch_q = patch_s = 0.0
    cache = disc.transfer_cache
    if cache:
        owners = cache["element"]
        faces = cache["faces"]
        bpts = np.stack([disc.transfer[int(f)].points for f in faces])
        bw = cache["weights"]
        normal = cache["normal"]
        lengths = cache["lengths"]
        h_perp = np.array([disc.transfer[int(f)].h_perp for f in faces])
        b, nqb = bw.shape
        ppts = cache["path_points"]
        pw = cache["path_weights"]
        ns = pw.shape[1] // nqb

        # phi - phi_h at the face points
        line_w = (pw.reshape(b, nqb, ns) / bw[..., None]).reshape(b, -1)
        s_path = case.sigma(ppts[..., 0], ppts[..., 1])
        q_path = basis.evaluate(sol.q[owners], ppts, owners)
        kinv_path = frozen.kappa_inv_at(owners, ppts)
        exact_int = -np.einsum("bp,bpd,bd->bp", line_w, s_path, normal).reshape(b, nqb, ns).sum(axis=-1)
        discrete_int = np.einsum("bp,bp,bpd,bd->bp", line_w, kinv_path, q_path, normal).reshape(b, nqb, ns).sum(axis=-1)
        diff = exact_int - discrete_int
        kappa_b = frozen.kappa_at(owners, bpts)
        positive = lengths > 0
        transfer_sq = float(np.sum(np.where(positive, bw * kappa_b * diff ** 2 / np.where(positive, lengths, 1.0), 0.0)))

        # I^q . n, I^u (and I^sigma . n) on Gamma_h
        hp = h_perp[:, None]
        iq_n = np.einsum("bqd,bd->bq", case.q(bpts[..., 0], bpts[..., 1]) - basis.evaluate(pair.q[owners], bpts, owners), normal)
        iu = case.u(bpts[..., 0], bpts[..., 1]) - basis.evaluate(pair.u[owners], bpts, owners)
        gamma_q = float(np.sum(bw * hp * iq_n ** 2))
        gamma_u = float(np.sum(bw * hp * iu ** 2))

        # normal derivative of the projection error's normal component on the patches
        grads = basis.grad_basis(ppts, owners)
        hp_path = h_perp[:, None]

        def patch_term(jacobian: np.ndarray, coeffs: np.ndarray) -> float:
            discrete = np.einsum("bcm,bpmd->bpcd", coeffs[owners], grads)
            dn = np.einsum("bc,bpcd,bd->bp", normal, jacobian - discrete, normal)
            return float(np.sum(pw * (hp_path * dn) ** 2))

        patch_q = patch_term(case.q_jacobian(ppts[..., 0], ppts[..., 1]), pair.q)
        if gradient_variant:
            patch_s = patch_term(case.sigma_jacobian(ppts[..., 0], ppts[..., 1]), pi_sigma)
            is_n = np.einsum(
                "bqd,bd->bq", case.sigma(bpts[..., 0], bpts[..., 1]) - basis.evaluate(pi_sigma[owners], bpts, owners), normal
            )
            gamma_s = float(np.sum(bw * hp * is_n ** 2))

    parts = {"q": eps_q_weighted, "jump": jump_eps, "transfer": transfer_sq}
    if gradient_variant:
        parts = {"sigma": sigma_terms["eps_sigma"], **parts}
    triple = _sqrt(sum(parts.values()))
    lambda_q = _sqrt(I_q + patch_q + gamma_q)
    lambda_u = _sqrt(gamma_u + I_u)

    report = ErrorReport(
        h=float(h) if h is not None else mesh.mesh_size_h,
        h_max=mesh.mesh_size_h,
        k=k,
        n_elements=m,
        dofs=disc.n_dofs,
        u=_sqrt(u_err),
        q=_sqrt(q_err),
        jump=_sqrt(jump),
        transfer=_sqrt(transfer_sq),
        triple=triple,
        triple_parts=parts,
        lambda_q=lambda_q,
        lambda_u=lambda_u,
        eps_u=_sqrt(eps_u),
        eps_q=_sqrt(eps_q),
        eps_uhat=_sqrt(eps_uhat),
        I_u=_sqrt(I_u),
        I_q=_sqrt(I_q),
        sigma=_sqrt(sigma_terms["sigma"]) if gradient_variant else None,
        lambda_sigma=_sqrt(sigma_terms["I_sigma"] + patch_s + gamma_s) if gradient_variant else None,
        eps_sigma=_sqrt(sigma_terms["eps_sigma"]) if gradient_variant else None,
        I_sigma=_sqrt(sigma_terms["I_sigma"]) if gradient_variant else None,
        sigma_consistency=_sqrt(sigma_terms["consistency"]) if gradient_variant else None,
    )
    logger.info(f"Errors at h={report.h:.4g}, k={k}: |u-u_h|={report.u:.3e}, |q-q_h|={report.q:.3e}")
    return report
