"""
Picard fixed-point drivers for kappa(u) and kappa(grad u).

Each step freezes the diffusivity and the source at the previous iterate,
solves the linear HDG system, and relaxes. Increments are measured in
L2(Omega_h); with orthonormal element bases that is the Euclidean norm of
the coefficient blocks.
"""
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from ..core.errors import ConfigurationError, DivergenceDetected, MaxItersExceeded
from ..core.problem import KappaVariant, ProblemSpec
from ..hdg.discretization import HDGDiscretization
from ..hdg.fields import FrozenFields
from ..hdg.skeleton import DEFAULT_RESIDUAL_TOL, condense_and_solve
from ..hdg.solution import DiscreteSolution

logger = logging.getLogger(__name__)

DIVERGENCE_GROWTH = 10.0
DIVERGENCE_STREAK = 3


@dataclass(frozen=True)
class PicardOptions:
    """Fixed-point iteration controls."""

    tol: float = 1e-10
    max_iters: int = 100
    relaxation: float = 1.0
    trace_contraction: bool = True
    residual_tol: float = DEFAULT_RESIDUAL_TOL
    check_full_residual: bool = False

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ConfigurationError("tol must be positive", "picard.tol")
        if not 0 < self.relaxation <= 1:
            raise ConfigurationError("relaxation must lie in (0, 1]", "picard.relaxation")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be at least 1", "picard.max_iters")

    @classmethod
    def from_settings(cls, section: Optional[Dict[str, Any]], residual_tol: Optional[float] = None) -> "PicardOptions":
        section = section or {}
        names = ("tol", "max_iters", "relaxation", "trace_contraction", "check_full_residual")
        known = {k: section[k] for k in names if k in section}
        if residual_tol is not None:
            known["residual_tol"] = residual_tol
        return cls(**known)


@dataclass
class IterationTrace:
    """Per-iteration record of a Picard run."""

    variant: str
    increments: List[float] = field(default_factory=list)
    relative_increments: List[float] = field(default_factory=list)
    sigma_increments: List[float] = field(default_factory=list)
    u_increments: List[float] = field(default_factory=list)
    ratios: List[float] = field(default_factory=list)
    clamp_events: List[int] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    diagnostics: Dict[str, Optional[float]] = field(default_factory=dict)

    def record(self, increment: float, relative: float, clamps: int, track_ratios: bool = True) -> None:
        if self.increments and track_ratios:
            self.ratios.append(_ratio(increment, self.increments[-1]))
        self.increments.append(increment)
        self.relative_increments.append(relative)
        self.clamp_events.append(clamps)
        self.iterations = len(self.increments)

    def diverging(self) -> bool:
        """True when the increment grew tenfold in each of the last three steps."""
        steps = self.increments[-(DIVERGENCE_STREAK + 1) :]
        if len(steps) <= DIVERGENCE_STREAK:
            return False
        return all(_ratio(b, a) >= DIVERGENCE_GROWTH for a, b in zip(steps, steps[1:]))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path


def _ratio(new: float, old: float) -> float:
    if old > 0:
        return new / old
    return float("inf") if new > 0 else 0.0


def _relative(diff_sq: float, new_sq: float) -> float:
    return float(np.sqrt(diff_sq / new_sq)) if new_sq > 0 else float(np.sqrt(diff_sq))


def boundary_data_smallness(disc: HDGDiscretization, g: Any) -> float:
    """
    ||l^{-1/2} gbar||_{Gamma_h} with gbar(x) = g(xbar), over points with l > 0.
    """
    cache = disc.transfer_cache
    if not cache:
        return 0.0
    anchors = cache["anchors"]
    values = np.asarray(g(anchors[..., 0], anchors[..., 1]), dtype=float)
    lengths = cache["lengths"]
    positive = lengths > 0
    integrand = np.where(positive, values ** 2 / np.where(positive, lengths, 1.0), 0.0)
    return float(np.sqrt(np.sum(cache["weights"] * integrand)))


def _diagnostics(problem: ProblemSpec, disc: HDGDiscretization) -> Dict[str, Optional[float]]:
    smallness = boundary_data_smallness(disc, problem.g)
    l_hat = problem.lipschitz.L_hat
    return {
        "boundary_data_smallness": smallness,
        "L_hat_times_smallness": l_hat * smallness if l_hat is not None else None,
    }


def _finish(trace: IterationTrace, opts: PicardOptions) -> None:
    if trace.converged:
        logger.info(
            f"Picard ({trace.variant}) converged in {trace.iterations} iterations, "
            f"final relative increment {trace.relative_increments[-1]:.3e}"
        )
        return
    message = f"Picard ({trace.variant}) did not converge in {opts.max_iters} iterations"
    logger.error(f"{message}: last increment {trace.increments[-1]:.3e}")
    raise MaxItersExceeded(message, trace=trace)


def picard_step(
    problem: ProblemSpec,
    disc: HDGDiscretization,
    zeta: np.ndarray,
    eta: Optional[np.ndarray] = None,
    residual_tol: float = DEFAULT_RESIDUAL_TOL,
    check_full_residual: bool = False,
) -> Tuple[DiscreteSolution, FrozenFields]:
    """One linearized HDG solve with coefficients frozen at (eta,) zeta."""
    if problem.kappa_variant is KappaVariant.OF_GRAD:
        eta = eta if eta is not None else np.zeros((disc.mesh.n_elements, 2, disc.n))
        frozen = FrozenFields.from_gradient_iterate(
            disc.basis, eta, zeta, problem.kappa, problem.source, problem.kappa_lo, problem.kappa_hi
        )
    else:
        frozen = FrozenFields.from_scalar_iterate(
            disc.basis, zeta, problem.kappa, problem.source, problem.kappa_lo, problem.kappa_hi
        )
    solution = condense_and_solve(disc, frozen, problem.g, problem.kappa_variant, residual_tol, check_full_residual)
    return solution, frozen


def solve_kappa_u(
    problem: ProblemSpec,
    disc: HDGDiscretization,
    opts: Optional[PicardOptions] = None,
    zeta0: Optional[np.ndarray] = None,
) -> Tuple[DiscreteSolution, IterationTrace]:
    """
    Fixed-point iteration for kappa = kappa(u).

    Args:
        problem: Problem with kappa_variant of-u
        disc: Discretization cache
        opts: Iteration controls
        zeta0: Initial iterate (M, dim); zero when omitted

    Returns:
        (last solution, trace)

    Raises:
        MaxItersExceeded: Iteration limit reached (DivergenceDetected on sustained growth)
    """
    if problem.kappa_variant is not KappaVariant.OF_U:
        raise ConfigurationError("solve_kappa_u needs the of-u variant", "kappa_variant")
    opts = opts or PicardOptions()
    trace = IterationTrace(variant=problem.kappa_variant.value, diagnostics=_diagnostics(problem, disc))
    zeta = np.zeros((disc.mesh.n_elements, disc.n)) if zeta0 is None else np.array(zeta0, dtype=float)
    solution: Optional[DiscreteSolution] = None
    for it in range(opts.max_iters):
        solution, frozen = picard_step(
            problem, disc, zeta, residual_tol=opts.residual_tol, check_full_residual=opts.check_full_residual
        )
        new = opts.relaxation * solution.u + (1.0 - opts.relaxation) * zeta
        diff_sq = float(np.sum((new - zeta) ** 2))
        relative = _relative(diff_sq, float(np.sum(new ** 2)))
        trace.record(float(np.sqrt(diff_sq)), relative, frozen.clamp_events, opts.trace_contraction)
        trace.u_increments.append(float(np.sqrt(diff_sq)))
        logger.debug(f"Picard iteration {it + 1}: increment {np.sqrt(diff_sq):.3e} (relative {relative:.3e})")
        zeta = new
        if relative <= opts.tol:
            trace.converged = True
            break
        if trace.diverging():
            logger.error(f"Picard divergence detected after {trace.iterations} iterations")
            raise DivergenceDetected(
                f"increments grew {DIVERGENCE_GROWTH:g}x for {DIVERGENCE_STREAK} consecutive iterations", trace=trace
            )
    _finish(trace, opts)
    return solution, trace


def solve_kappa_grad(
    problem: ProblemSpec,
    disc: HDGDiscretization,
    opts: Optional[PicardOptions] = None,
    zeta0: Optional[np.ndarray] = None,
    eta0: Optional[np.ndarray] = None,
) -> Tuple[DiscreteSolution, IterationTrace]:
    """
    Fixed-point iteration on the pair (eta, zeta) for kappa = kappa(grad u).

    Convergence uses the product norm (||d sigma||^2 + ||d u||^2)^{1/2},
    relative to the norm of the new pair.
    """
    if problem.kappa_variant is not KappaVariant.OF_GRAD:
        raise ConfigurationError("solve_kappa_grad needs the of-grad variant", "kappa_variant")
    opts = opts or PicardOptions()
    trace = IterationTrace(variant=problem.kappa_variant.value, diagnostics=_diagnostics(problem, disc))
    m, n = disc.mesh.n_elements, disc.n
    zeta = np.zeros((m, n)) if zeta0 is None else np.array(zeta0, dtype=float)
    eta = np.zeros((m, 2, n)) if eta0 is None else np.array(eta0, dtype=float)
    solution: Optional[DiscreteSolution] = None
    w = opts.relaxation
    for it in range(opts.max_iters):
        solution, frozen = picard_step(problem, disc, zeta, eta, opts.residual_tol, opts.check_full_residual)
        new_zeta = w * solution.u + (1.0 - w) * zeta
        new_eta = w * solution.sigma + (1.0 - w) * eta
        du = float(np.sum((new_zeta - zeta) ** 2))
        ds = float(np.sum((new_eta - eta) ** 2))
        norm_sq = float(np.sum(new_zeta ** 2) + np.sum(new_eta ** 2))
        relative = _relative(du + ds, norm_sq)
        trace.record(float(np.sqrt(du + ds)), relative, frozen.clamp_events, opts.trace_contraction)
        trace.u_increments.append(float(np.sqrt(du)))
        trace.sigma_increments.append(float(np.sqrt(ds)))
        logger.debug(f"Picard iteration {it + 1}: increment {np.sqrt(du + ds):.3e} (relative {relative:.3e})")
        zeta, eta = new_zeta, new_eta
        if relative <= opts.tol:
            trace.converged = True
            break
        if trace.diverging():
            logger.error(f"Picard divergence detected after {trace.iterations} iterations")
            raise DivergenceDetected(
                f"increments grew {DIVERGENCE_GROWTH:g}x for {DIVERGENCE_STREAK} consecutive iterations", trace=trace
            )
    _finish(trace, opts)
    return solution, trace


def solve(
    problem: ProblemSpec,
    disc: HDGDiscretization,
    opts: Optional[PicardOptions] = None,
    initial: Optional[DiscreteSolution] = None,
) -> Tuple[DiscreteSolution, IterationTrace]:
    """Dispatch on the problem's kappa variant."""
    if problem.kappa_variant is KappaVariant.OF_GRAD:
        return solve_kappa_grad(
            problem,
            disc,
            opts,
            initial.u if initial is not None else None,
            initial.sigma if initial is not None else None,
        )
    return solve_kappa_u(problem, disc, opts, initial.u if initial is not None else None)


def _locate(coarse: HDGDiscretization, points: np.ndarray, candidates: int = 8) -> np.ndarray:
    """Coarse element containing each point; nearest centroid for points outside."""
    centroids = coarse.mesh.centroids
    count = min(candidates, len(centroids))
    _, idx = cKDTree(centroids).query(points, k=count)
    idx = idx.reshape(len(points), count)
    verts = coarse.mesh.element_vertices[idx]
    v0, e1, e2 = verts[..., 0, :], verts[..., 1, :] - verts[..., 0, :], verts[..., 2, :] - verts[..., 0, :]
    det = e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0]
    d = points[:, None, :] - v0
    l1 = (d[..., 0] * e2[..., 1] - d[..., 1] * e2[..., 0]) / det
    l2 = (e1[..., 0] * d[..., 1] - e1[..., 1] * d[..., 0]) / det
    inside = (l1 >= -1e-12) & (l2 >= -1e-12) & (l1 + l2 <= 1 + 1e-12)
    first = np.where(inside.any(axis=1), inside.argmax(axis=1), 0)
    return idx[np.arange(len(points)), first]


def prolongate_iterate(coarse: HDGDiscretization, coeffs: np.ndarray, fine: HDGDiscretization) -> np.ndarray:
    """
    Elementwise L2 projection of a coarse-mesh polynomial field onto the fine mesh.

    Args:
        coarse: Coarse discretization
        coeffs: Coarse coefficients (M_c, dim_c) or (M_c, 2, dim_c)
        fine: Fine discretization

    Returns:
        Fine coefficients (M_f, dim_f) or (M_f, 2, dim_f)
    """
    points = fine.vol_points.reshape(-1, 2)
    owners = _locate(coarse, points)
    phi_c = coarse.basis.eval_basis(points[:, None, :], owners)[:, 0, :]
    vector = coeffs.ndim == 3
    values = np.einsum("pj,pcj->pc", phi_c, coeffs[owners]) if vector else np.einsum("pj,pj->p", phi_c, coeffs[owners])
    m, nq = fine.vol_weights.shape
    values = values.reshape((m, nq, 2) if vector else (m, nq))
    if vector:
        moments = np.einsum("eq,eqi,eqc->eci", fine.vol_weights, fine.phi, values)
        return np.linalg.solve(fine.mass[:, None], moments[..., None])[..., 0]
    moments = np.einsum("eq,eqi,eq->ei", fine.vol_weights, fine.phi, values)
    return np.linalg.solve(fine.mass, moments[..., None])[..., 0]
