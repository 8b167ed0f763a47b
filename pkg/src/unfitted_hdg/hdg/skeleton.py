"""
Static condensation onto the trace unknowns, global sparse solve and local
recovery.
"""
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.linalg import splu

from ..core.errors import SolverFailure
from ..core.problem import KappaVariant
from .discretization import HDGDiscretization
from .fields import FrozenFields
from .local import (
    BoundaryData,
    LocalElementSystem,
    assemble_local,
    assemble_local_gradient_variant,
    solve_local,
    transfer_couplings,
)
from .solution import DiscreteSolution

logger = logging.getLogger(__name__)

DEFAULT_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SkeletonSystem:
    """Condensed system over all trace dofs; dof_map is (F, k + 1)."""

    matrix: csr_matrix
    rhs: np.ndarray
    dof_map: np.ndarray

    @property
    def n_dofs(self) -> int:
        return int(self.matrix.shape[0])


@dataclass(frozen=True, eq=False)
class CondensedElements:
    """Local solution operators: local = X uhat_T + y."""

    local: LocalElementSystem
    X: np.ndarray
    y: np.ndarray


def local_system(disc: HDGDiscretization, frozen: FrozenFields, variant: KappaVariant) -> LocalElementSystem:
    if KappaVariant(variant) is KappaVariant.OF_GRAD:
        return assemble_local_gradient_variant(disc, frozen)
    return assemble_local(disc, frozen)


def build_skeleton_system(
    disc: HDGDiscretization,
    frozen: FrozenFields,
    g: BoundaryData,
    variant: KappaVariant = KappaVariant.OF_U,
) -> Tuple[SkeletonSystem, CondensedElements]:
    """
    Condense every element and assemble the skeleton system.

    Interior face rows hold the flux balance; boundary face rows hold
    <uhat, mu> - <phi_h, mu> = 0 with phi_h linear in the element's q.

    Args:
        disc: Discretization cache
        frozen: Frozen coefficient fields
        g: Dirichlet data on the physical boundary
        variant: Scheme variant

    Returns:
        (SkeletonSystem, CondensedElements)
    """
    local = local_system(disc, frozen, variant)
    X, y = solve_local(local)
    nf = disc.nf
    blocks = np.einsum("eij,ejk->eik", local.G, X) - disc.trace_mass
    rhs_local = -np.einsum("eij,ej->ei", local.G, y)

    P, g_moments = transfer_couplings(disc, frozen, g)
    if len(P):
        cache = disc.transfer_cache
        elements = cache["element"]
        rows = cache["local"][:, None] * nf + np.arange(nf)
        xq = X[elements][:, local.q, :]
        yq = y[elements][:, local.q]
        blocks[elements[:, None], rows, :] = -np.einsum("bmi,bic->bmc", P, xq)
        np.add.at(blocks, (elements[:, None], rows, rows), 1.0)
        rhs_local[elements[:, None], rows] = g_moments + np.einsum("bmi,bi->bm", P, yq)

    dofs = disc.dofs
    size = 3 * nf
    row_index = np.broadcast_to(dofs[:, :, None], (len(dofs), size, size))
    col_index = np.broadcast_to(dofs[:, None, :], (len(dofs), size, size))
    matrix = coo_matrix(
        (blocks.ravel(), (row_index.ravel(), col_index.ravel())), shape=(disc.n_dofs, disc.n_dofs)
    ).tocsr()
    rhs = np.bincount(dofs.ravel(), weights=rhs_local.ravel(), minlength=disc.n_dofs)
    dof_map = np.arange(disc.n_dofs).reshape(-1, nf)
    return SkeletonSystem(matrix=matrix, rhs=rhs, dof_map=dof_map), CondensedElements(local=local, X=X, y=y)


def solve_sparse(matrix: csr_matrix, rhs: np.ndarray, residual_tol: float = DEFAULT_RESIDUAL_TOL) -> Tuple[np.ndarray, float]:
    """
    Direct sparse solve with a normwise backward-error check.

    Raises:
        SolverFailure: If factorization fails or the backward error exceeds residual_tol
    """
    try:
        solution = splu(matrix.tocsc()).solve(rhs)
    except RuntimeError as e:
        logger.error(f"Error factorizing skeleton matrix: {e}")
        raise SolverFailure(f"sparse factorization failed: {e}") from e
    if not np.all(np.isfinite(solution)):
        raise SolverFailure("sparse solve produced non-finite values")
    residual = float(np.abs(matrix @ solution - rhs).max()) if len(rhs) else 0.0
    scale = float(abs(matrix).sum(axis=1).max()) * float(np.abs(solution).max()) + float(np.abs(rhs).max()) if len(rhs) else 0.0
    backward = residual / scale if scale > 0 else residual
    if backward > residual_tol:
        raise SolverFailure(f"relative residual {backward:.3e} exceeds {residual_tol:.1e}")
    return solution, backward


def recover(
    disc: HDGDiscretization, condensed: CondensedElements, uhat: np.ndarray, residual: float = 0.0
) -> DiscreteSolution:
    """Local recovery of (sigma,) q and u from the trace solution."""
    local_values = np.einsum("eic,ec->ei", condensed.X, uhat[disc.dofs]) + condensed.y
    local = condensed.local
    m, n = disc.mesh.n_elements, disc.n
    sigma = local_values[:, local.sigma].reshape(m, 2, n) if local.sigma is not None else None
    return DiscreteSolution(
        degree=disc.k,
        q=local_values[:, local.q].reshape(m, 2, n),
        u=local_values[:, local.u],
        uhat=uhat.reshape(-1, disc.nf),
        sigma=sigma,
        residual=residual,
    )


def condense_and_solve(
    disc: HDGDiscretization,
    frozen: FrozenFields,
    g: BoundaryData,
    variant: KappaVariant = KappaVariant.OF_U,
    residual_tol: float = DEFAULT_RESIDUAL_TOL,
    check_full_residual: bool = False,
) -> DiscreteSolution:
    """
    Solve one linearized HDG step.

    By default the accuracy check is the normwise backward error of the
    skeleton solve, which the solution carries as its residual. With
    check_full_residual the recovered (q, u, uhat) are also substituted into
    the uncondensed system, and that relative residual is checked and carried
    instead; this assembles the monolithic matrix and is meant for debugging.

    Args:
        disc: Discretization cache
        frozen: Frozen coefficient fields
        g: Dirichlet data on the physical boundary
        variant: Scheme variant
        residual_tol: Bound on the backward error (and on the full residual when checked)
        check_full_residual: Also check the residual of the uncondensed system

    Returns:
        DiscreteSolution

    Raises:
        SingularLocalSolve: From the local solves
        SolverFailure: If the skeleton system cannot be solved accurately
    """
    system, condensed = build_skeleton_system(disc, frozen, g, variant)
    uhat, backward = solve_sparse(system.matrix, system.rhs, residual_tol)
    logger.debug(f"Skeleton solve: {system.n_dofs} dofs, backward error {backward:.2e}")
    solution = recover(disc, condensed, uhat, backward)
    if not check_full_residual:
        return solution

    from .monolithic import monolithic_residual

    full = monolithic_residual(disc, frozen, g, solution, variant)
    logger.debug(f"Uncondensed residual {full:.2e}")
    if full > residual_tol:
        raise SolverFailure(f"uncondensed residual {full:.2e} exceeds {residual_tol:.0e}")
    return replace(solution, residual=full)


def local_conservation_residuals(
    disc: HDGDiscretization, frozen: FrozenFields, solution: DiscreteSolution
) -> np.ndarray:
    """
    Relative elementwise balance <qhat.n, 1>_dT - (f, 1)_T.

    Each entry is scaled by |f| |T| + |qhat| |dT| (sup norms at quadrature points).
    """
    m = disc.mesh.n_elements
    elements = np.arange(m)
    q = np.einsum("efqi,edi->efqd", disc.phi_face, solution.q)
    u = np.einsum("efqi,ei->efq", disc.phi_face, solution.u)
    uhat = np.einsum("efqm,efm->efq", disc.psi_face, solution.uhat[disc.mesh.element_faces])
    qhat_n = np.einsum("efqd,efd->efq", q, disc.normals) + disc.tau_local[..., None] * (u - uhat)
    flux = np.einsum("efq,efq->e", disc.face_weights, qhat_n)
    f = frozen.source_at(elements, disc.vol_points)
    load = np.einsum("eq,eq->e", disc.vol_weights, f)
    scale = np.abs(f).max(axis=1) * disc.mesh.areas + np.abs(qhat_n).max(axis=(1, 2)) * disc.mesh.edge_lengths.sum(
        axis=1
    )
    return np.abs(flux - load) / np.where(scale > 0, scale, 1.0)


def dump_skeleton(system: SkeletonSystem, path: Union[str, Path], header: Optional[str] = None) -> Path:
    """Write the skeleton matrix as 'row col value' lines (17 significant digits)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    coo = system.matrix.tocoo()
    with path.open("w") as handle:
        if header:
            handle.write(f"# {header}\n")
        handle.write(f"# {system.n_dofs} {system.n_dofs} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            handle.write(f"{r} {c} {v:.17g}\n")
    logger.info(f"Skeleton matrix written to {path}")
    return path
