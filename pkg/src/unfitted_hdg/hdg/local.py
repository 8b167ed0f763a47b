"""
Element-local HDG systems and the transfer-path boundary operator.

For trace values uhat on an element's faces the local unknowns x solve

    K x = R uhat + b,

and the element's contribution to the flux balance on its faces is
G x - T uhat with T the tau-weighted trace mass.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from ..core.errors import PathDegenerate, SingularLocalSolve
from ..core.problem import KappaVariant
from .discretization import HDGDiscretization
from .fields import FrozenFields

logger = logging.getLogger(__name__)

BoundaryData = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class LocalElementSystem:
    """
    Batched local systems of all elements.

    K: (M, N, N); R: (M, N, 3 (k+1)); b: (M, N); G: (M, 3 (k+1), N).
    q, u and sigma are the slices of those unknowns in the local vector.
    """

    variant: KappaVariant
    K: np.ndarray
    R: np.ndarray
    b: np.ndarray
    G: np.ndarray
    q: slice
    u: slice
    sigma: Optional[slice] = None

    @property
    def size(self) -> int:
        return int(self.K.shape[1])


def _weighted_mass(disc: HDGDiscretization, values: np.ndarray) -> np.ndarray:
    return np.einsum("eq,eq,eqi,eqj->eij", disc.vol_weights, values, disc.phi, disc.phi)


def _source_moments(disc: HDGDiscretization, frozen: FrozenFields) -> np.ndarray:
    elements = np.arange(disc.mesh.n_elements)
    f = frozen.source_at(elements, disc.vol_points)
    return np.einsum("eq,eq,eqi->ei", disc.vol_weights, f, disc.phi)


def assemble_local(disc: HDGDiscretization, frozen: FrozenFields) -> LocalElementSystem:
    """
    Local systems of the kappa(u) scheme, unknowns [q_x, q_y, u].

    (kappa^{-1} q, v) - (u, div v) + <uhat, v.n> = 0
    -(q, grad w) + <q.n + tau (u - uhat), w> = (f, w)

    Args:
        disc: Discretization cache
        frozen: kappa^{-1} and source of the current step

    Returns:
        LocalElementSystem
    """
    n = disc.n
    m = disc.mesh.n_elements
    elements = np.arange(m)
    a = _weighted_mass(disc, frozen.kappa_inv_at(elements, disc.vol_points))
    bx, by = disc.b_blocks
    ex, ey = disc.e_blocks
    cx, cy = disc.c_blocks

    K = np.zeros((m, 3 * n, 3 * n))
    K[:, :n, :n] = a
    K[:, n : 2 * n, n : 2 * n] = a
    K[:, :n, 2 * n :] = bx
    K[:, n : 2 * n, 2 * n :] = by
    K[:, 2 * n :, :n] = bx + ex
    K[:, 2 * n :, n : 2 * n] = by + ey
    K[:, 2 * n :, 2 * n :] = disc.s_block

    R = np.concatenate([-cx, -cy, disc.h_block], axis=1)
    b = np.zeros((m, 3 * n))
    b[:, 2 * n :] = _source_moments(disc, frozen)
    G = np.transpose(np.concatenate([cx, cy, disc.h_block], axis=1), (0, 2, 1))
    return LocalElementSystem(
        variant=KappaVariant.OF_U, K=K, R=R, b=b, G=G, q=slice(0, 2 * n), u=slice(2 * n, 3 * n)
    )


def assemble_local_gradient_variant(disc: HDGDiscretization, frozen: FrozenFields) -> LocalElementSystem:
    """
    Local systems of the kappa(grad u) scheme, unknowns [sigma_x, sigma_y, q_x, q_y, u].

    (sigma, v) + (u, div v) - <uhat, v.n> = 0
    (q, s) + (kappa(eta) sigma, s) = 0
    -(q, grad w) + <q.n + tau (u - uhat), w> = (f, w)
    """
    n = disc.n
    m = disc.mesh.n_elements
    elements = np.arange(m)
    k_mass = _weighted_mass(disc, frozen.kappa_at(elements, disc.vol_points))
    mass = disc.mass
    bx, by = disc.b_blocks
    ex, ey = disc.e_blocks
    cx, cy = disc.c_blocks

    K = np.zeros((m, 5 * n, 5 * n))
    sx, sy, qx, qy, u = (slice(i * n, (i + 1) * n) for i in range(5))
    K[:, sx, sx] = mass
    K[:, sx, u] = -bx
    K[:, sy, sy] = mass
    K[:, sy, u] = -by
    K[:, qx, sx] = k_mass
    K[:, qx, qx] = mass
    K[:, qy, sy] = k_mass
    K[:, qy, qy] = mass
    K[:, u, qx] = bx + ex
    K[:, u, qy] = by + ey
    K[:, u, u] = disc.s_block

    zeros = np.zeros_like(cx)
    R = np.concatenate([cx, cy, zeros, zeros, disc.h_block], axis=1)
    b = np.zeros((m, 5 * n))
    b[:, u] = _source_moments(disc, frozen)
    G = np.transpose(np.concatenate([zeros, zeros, cx, cy, disc.h_block], axis=1), (0, 2, 1))
    return LocalElementSystem(
        variant=KappaVariant.OF_GRAD,
        K=K,
        R=R,
        b=b,
        G=G,
        q=slice(2 * n, 4 * n),
        u=slice(4 * n, 5 * n),
        sigma=slice(0, 2 * n),
    )


def solve_local(local: LocalElementSystem) -> Tuple[np.ndarray, np.ndarray]:
    """
    Factor every local matrix once.

    Returns:
        X = K^{-1} R of shape (M, N, 3 (k+1)) and y = K^{-1} b of shape (M, N)

    Raises:
        SingularLocalSolve: If any local matrix is singular
    """
    rhs = np.concatenate([local.R, local.b[..., None]], axis=2)
    try:
        sol = np.linalg.solve(local.K, rhs)
    except np.linalg.LinAlgError as e:
        logger.error(f"Error in local HDG solve: {e}")
        raise SingularLocalSolve(f"local HDG matrix is singular: {e}") from e
    if not np.all(np.isfinite(sol)):
        raise SingularLocalSolve("local HDG solve produced non-finite values")
    return sol[..., :-1], sol[..., -1]


def transfer_couplings(
    disc: HDGDiscretization, frozen: FrozenFields, g: BoundaryData
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Transfer operator of every boundary face.

    phi_h(x) = g(xbar) + int_0^l(x) kappa^{-1} (E_h q_h)(x + s n) . n ds,
    tested against the face basis.

    Args:
        disc: Discretization cache
        frozen: kappa^{-1} along the paths (extrapolated from T^e)
        g: Dirichlet data g(x, y) on the physical boundary

    Returns:
        P of shape (B, k+1, 2 dim), acting on [q_x, q_y] of T^e, and the face
        moments of g(xbar) of shape (B, k+1), in disc.boundary_order

    Raises:
        PathDegenerate: If a path length is negative
    """
    cache = disc.transfer_cache
    if not cache:
        return np.zeros((0, disc.nf, 2 * disc.n)), np.zeros((0, disc.nf))
    if np.any(cache["lengths"] < 0):
        raise PathDegenerate("negative transfer path length")
    kinv = frozen.kappa_inv_at(cache["element"], cache["path_points"])
    psi_at_path = cache["psi"][:, cache["path_owner"], :]
    scalar = np.einsum("bp,bp,bpm,bpi->bmi", cache["path_weights"], kinv, psi_at_path, cache["path_phi"])
    normal = cache["normal"]
    P = np.concatenate([scalar * normal[:, 0, None, None], scalar * normal[:, 1, None, None]], axis=2)
    anchors = cache["anchors"]
    g_values = np.asarray(g(anchors[..., 0], anchors[..., 1]), dtype=float)
    rhs = np.einsum("bq,bq,bqm->bm", cache["weights"], g_values, cache["psi"])
    return P, rhs


def transfer_coupling(
    disc: HDGDiscretization, frozen: FrozenFields, g: BoundaryData, face: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Transfer block (k+1, 2 dim) and g moments (k+1,) of one boundary face."""
    P, rhs = transfer_couplings(disc, frozen, g)
    row = int(np.flatnonzero(disc.boundary_order == face)[0])
    return P[row], rhs[row]
