"""
The full uncondensed HDG system, assembled as one sparse matrix over
[local unknowns of every element, trace unknowns]. Used to cross-check the
condensed solve.
"""
import logging
from typing import List, Tuple

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from ..core.problem import KappaVariant
from .discretization import HDGDiscretization
from .fields import FrozenFields
from .local import BoundaryData, transfer_couplings
from .skeleton import DEFAULT_RESIDUAL_TOL, local_system, solve_sparse
from .solution import DiscreteSolution

logger = logging.getLogger(__name__)


def assemble_monolithic(
    disc: HDGDiscretization,
    frozen: FrozenFields,
    g: BoundaryData,
    variant: KappaVariant = KappaVariant.OF_U,
) -> Tuple[csr_matrix, np.ndarray, int]:
    """
    Assemble the uncondensed system.

    Returns:
        (matrix, rhs, local block size N); unknown T * N + i is local unknown
        i of element T and M * N + d is trace dof d
    """
    local = local_system(disc, frozen, variant)
    m, size = local.K.shape[:2]
    nf = disc.nf
    offset = m * size
    total = offset + disc.n_dofs
    local_ids = np.arange(m)[:, None] * size + np.arange(size)
    dofs = disc.dofs

    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []

    def add(r: np.ndarray, c: np.ndarray, v: np.ndarray) -> None:
        r, c, v = np.broadcast_arrays(r, c, v)
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(v.ravel())

    # local equations K x - R uhat = b
    add(local_ids[:, :, None], local_ids[:, None, :], local.K)
    add(local_ids[:, :, None], offset + dofs[:, None, :], -local.R)

    # flux balance, skipping boundary faces
    keep = ~np.repeat(disc.is_boundary_local, nf, axis=1)
    G = local.G * keep[:, :, None]
    T = disc.trace_mass * keep[:, :, None]
    add(offset + dofs[:, :, None], local_ids[:, None, :], G)
    add(offset + dofs[:, :, None], offset + dofs[:, None, :], -T)

    rhs = np.zeros(total)
    rhs[:offset] = local.b.ravel()

    P, g_moments = transfer_couplings(disc, frozen, g)
    if len(P):
        cache = disc.transfer_cache
        face_dofs = cache["faces"][:, None] * nf + np.arange(nf)
        q_ids = local_ids[cache["element"]][:, local.q]
        add(offset + face_dofs[:, :, None], offset + face_dofs[:, None, :], np.eye(nf)[None])
        add(offset + face_dofs[:, :, None], q_ids[:, None, :], -P)
        rhs[offset + face_dofs] = g_moments

    matrix = coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(total, total)
    ).tocsr()
    return matrix, rhs, size


def solve_monolithic(
    disc: HDGDiscretization,
    frozen: FrozenFields,
    g: BoundaryData,
    variant: KappaVariant = KappaVariant.OF_U,
    residual_tol: float = DEFAULT_RESIDUAL_TOL,
) -> DiscreteSolution:
    """Solve the uncondensed system directly."""
    matrix, rhs, size = assemble_monolithic(disc, frozen, g, variant)
    solution, backward = solve_sparse(matrix, rhs, residual_tol)
    m, n = disc.mesh.n_elements, disc.n
    local_values = solution[: m * size].reshape(m, size)
    local = local_system(disc, frozen, variant)
    logger.debug(f"Monolithic solve: {matrix.shape[0]} unknowns, backward error {backward:.2e}")
    return DiscreteSolution(
        degree=disc.k,
        q=local_values[:, local.q].reshape(m, 2, n),
        u=local_values[:, local.u],
        uhat=solution[m * size :].reshape(-1, disc.nf),
        sigma=local_values[:, local.sigma].reshape(m, 2, n) if local.sigma is not None else None,
        residual=backward,
    )


def monolithic_residual(
    disc: HDGDiscretization,
    frozen: FrozenFields,
    g: BoundaryData,
    solution: DiscreteSolution,
    variant: KappaVariant = KappaVariant.OF_U,
) -> float:
    """Relative residual of a solution in the uncondensed system."""
    matrix, rhs, size = assemble_monolithic(disc, frozen, g, variant)
    m = disc.mesh.n_elements
    parts = [solution.sigma.reshape(m, -1)] if KappaVariant(variant) is KappaVariant.OF_GRAD else []
    parts += [solution.q.reshape(m, -1), solution.u]
    vector = np.concatenate([np.concatenate(parts, axis=1).ravel(), solution.uhat.ravel()])
    residual = float(np.linalg.norm(matrix @ vector - rhs))
    scale = float(np.linalg.norm(rhs)) + float(abs(matrix).sum(axis=1).max()) * float(np.linalg.norm(vector))
    return residual / scale if scale > 0 else residual
