"""
Averaged normal variation of a polynomial field along transfer paths.

    delta_v(x) = (1 / l(x)) int_0^l(x) [v(x + s n) - v(x)] . n ds

with delta_v = 0 where l(x) = 0. ||l^{1/2} delta_v||_e is bounded by
(1/sqrt 3) r_e^{3/2} C_ext C_inv ||v||_{T^e} and by
(1/sqrt 3) r_e ||h_perp d_n(v . n)||_{T^e_ext}.
"""
import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

import numpy as np

from ..basis.polynomials import ElementBasis
from ..basis.quadrature import Domain, quadrature, triangle_points
from ..mesh.admissibility import estimate_face_constants
from ..mesh.transfer import TransferData

logger = logging.getLogger(__name__)

# relative slack accepted as rounding
SLACK_TOL = 1e-12


@dataclass(frozen=True)
class DeltaDiagnostic:
    """Measured ||l^{1/2} delta_v||_e against both bounds."""

    face: int
    value: float
    constant_bound: float
    derivative_bound: float
    r_e: float
    C_ext: float
    C_inv: float

    @property
    def constant_slack(self) -> float:
        return self.constant_bound - self.value

    @property
    def derivative_slack(self) -> float:
        return self.derivative_bound - self.value

    @property
    def ok(self) -> bool:
        tol = SLACK_TOL * max(self.value, 1.0)
        return self.constant_slack >= -tol and self.derivative_slack >= -tol

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.update(constant_slack=self.constant_slack, derivative_slack=self.derivative_slack, ok=self.ok)
        return data


def delta_values(transfer: TransferData, element: ElementBasis, coeffs: np.ndarray, order: int) -> np.ndarray:
    """delta_v at the face quadrature points of the transfer data, shape (nq,)."""
    coeffs = np.asarray(coeffs, dtype=float)
    nodes, weights = quadrature(Domain.SEGMENT, order)
    n = transfer.normal
    lengths = transfer.lengths
    base = element.eval_basis(transfer.points) @ coeffs.T @ n
    path = transfer.points[:, None, :] + (lengths[:, None] * nodes[None, :])[..., None] * n
    along = (element.eval_basis(path.reshape(-1, 2)) @ coeffs.T @ n).reshape(path.shape[:2])
    # the mean over the path is the weighted sum over unit-interval nodes
    mean = along @ weights
    return np.where(lengths > 0, mean - base, 0.0)


def delta_diagnostic(
    transfer: TransferData,
    element: ElementBasis,
    coeffs: np.ndarray,
    c_ext: Optional[float] = None,
    c_inv: Optional[float] = None,
) -> DeltaDiagnostic:
    """
    Measure ||l^{1/2} delta_v||_e for v = sum coeffs phi on T^e.

    Args:
        transfer: Transfer data of the face
        element: Basis of T^e
        coeffs: Vector field coefficients (2, dim)
        c_ext: Extension constant of the face (estimated when None)
        c_inv: Inverse constant of the face (estimated when None)

    Returns:
        DeltaDiagnostic
    """
    k = element.degree
    order = 2 * k + 2
    if c_ext is None or c_inv is None:
        c_ext, c_inv = estimate_face_constants(transfer, element, k)
    coeffs = np.asarray(coeffs, dtype=float)
    n = transfer.normal

    delta = delta_values(transfer, element, coeffs, order)
    value = float(np.sqrt(np.sum(transfer.weights * transfer.lengths * delta ** 2)))

    pts, wts = triangle_points(element.vertices[None], order)
    v = element.eval_basis(pts[0]) @ coeffs.T
    v_norm = float(np.sqrt(np.sum(wts[0] * np.sum(v ** 2, axis=-1))))
    r_e = transfer.r_e
    constant_bound = r_e ** 1.5 * c_ext * c_inv * v_norm / np.sqrt(3.0)

    patch_pts, patch_wts = transfer.patch_quadrature(order)
    grads = element.grad_basis(patch_pts.reshape(-1, 2))
    dn = np.einsum("c,cj,pjd,d->p", n, coeffs, grads, n)
    ext = float(np.sqrt(np.sum(patch_wts.ravel() * (transfer.h_perp * dn) ** 2)))
    derivative_bound = r_e * ext / np.sqrt(3.0)

    result = DeltaDiagnostic(
        face=transfer.face,
        value=value,
        constant_bound=float(constant_bound),
        derivative_bound=float(derivative_bound),
        r_e=r_e,
        C_ext=c_ext,
        C_inv=c_inv,
    )
    if not result.ok:
        logger.warning(f"Face {transfer.face}: delta bound violated ({value:.3e} > {min(constant_bound, derivative_bound):.3e})")
    return result
