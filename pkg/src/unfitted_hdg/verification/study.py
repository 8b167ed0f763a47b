"""
Convergence studies over a sequence of meshes for a manufactured case.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..core.errors import ConfigurationError
from ..core.problem import KappaVariant, LipschitzConstants
from ..geometry.boundary import DomainBoundary
from ..hdg.discretization import HDGDiscretization
from ..hdg.fields import FrozenFields
from ..hdg.skeleton import local_conservation_residuals
from ..hdg.solution import DiscreteSolution
from ..mesh.admissibility import AdmissibilityReport, build_mesh_for_degree
from ..mesh.generator import MeshPolicy
from ..nonlinear.picard import IterationTrace, PicardOptions, prolongate_iterate, solve
from .eoc import eoc, eoc_table
from .errors import ErrorReport, compute_errors
from .manufactured import ManufacturedCase

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AcceptanceBands:
    """Allowed deviation of measured rates from k + 1."""

    finest_band: float = 0.2
    coarsest_band: float = 0.5
    norms: Optional[Sequence[str]] = None

    @classmethod
    def from_settings(cls, section: Optional[Dict[str, Any]]) -> "AcceptanceBands":
        section = section or {}
        return cls(
            finest_band=float(section.get("finest_band", 0.2)),
            coarsest_band=float(section.get("coarsest_band", 0.5)),
            norms=section.get("norms"),
        )

    def checked_norms(self, variant: KappaVariant) -> List[str]:
        if self.norms:
            return list(self.norms)
        return ["u", "q", "sigma"] if variant is KappaVariant.OF_GRAD else ["u", "q"]


@dataclass
class StudyLevel:
    """Everything measured on one mesh of a study."""

    h: float
    report: ErrorReport
    trace: IterationTrace
    admissibility: AdmissibilityReport
    conservation: float
    smallness: Dict[str, Optional[float]]
    gap_fraction: float = 0.0
    solution: Optional[DiscreteSolution] = None
    disc: Optional[HDGDiscretization] = None

    def summary(self) -> Dict[str, Any]:
        return {
            "h": self.h,
            "elements": self.report.n_elements,
            "picard_iterations": self.trace.iterations,
            "admissible": self.admissibility.overall_ok,
            "gap_fraction": self.gap_fraction,
            "R": self.admissibility.R,
            "max_conservation_residual": self.conservation,
            "smallness": self.smallness,
        }


@dataclass
class StudyResult:
    """Levels, rates and the acceptance verdict of a study."""

    k: int
    variant: KappaVariant
    levels: List[StudyLevel]
    rates: List[Dict[str, Optional[float]]]
    verdict: Dict[str, Any] = field(default_factory=dict)

    @property
    def reports(self) -> List[ErrorReport]:
        return [level.report for level in self.levels]

    @property
    def passed(self) -> bool:
        return bool(self.verdict.get("passed", False))

    def table(self) -> pd.DataFrame:
        return eoc_table(self.reports)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "variant": self.variant.value,
            "levels": [level.summary() for level in self.levels],
            "reports": [r.to_dict() for r in self.reports],
            "rates": self.rates,
            "verdict": self.verdict,
        }


def smallness_diagnostics(
    variant: KappaVariant, h: float, kappa_hi: float, lipschitz: LipschitzConstants
) -> Dict[str, Optional[float]]:
    """
    Well-posedness smallness quantities at mesh size h (proof constant c = 1).
    """
    l_f = lipschitz.L_f
    if l_f is None:
        return {"kappa_u": None, "kappa_grad": None}
    kappa_u = max(h, 1.0) * l_f
    kappa_grad = (16.0 * max(1.0, kappa_hi) ** 2 + 40.0 * max(h, 1.0) ** 2) * l_f ** 2
    return {"kappa_u": kappa_u, "kappa_grad": kappa_grad if variant is KappaVariant.OF_GRAD else None}


def acceptance_verdict(
    rates: List[Dict[str, Optional[float]]], k: int, norms: Sequence[str], bands: AcceptanceBands
) -> Dict[str, Any]:
    """
    Check the finest and coarsest rate pairs against bands around k + 1.

    A norm that is exact (rate None) passes.
    """
    target = k + 1.0
    checks: List[Dict[str, Any]] = []
    pairs = [("finest", len(rates) - 1, bands.finest_band), ("coarsest", 0, bands.coarsest_band)]
    for label, index, band in pairs:
        for name in norms:
            value = rates[index].get(name)
            ok = value is None or abs(value - target) <= band
            checks.append({"pair": label, "norm": name, "rate": value, "band": [target - band, target + band], "ok": ok})
    return {"target": target, "checks": checks, "passed": all(c["ok"] for c in checks)}


def _level(
    boundary: DomainBoundary,
    case: ManufacturedCase,
    k: int,
    h: float,
    kappa_lo: float,
    kappa_hi: float,
    tau: float,
    tau_boundary: Optional[float],
    picard: PicardOptions,
    policy: Optional[MeshPolicy],
    lipschitz: LipschitzConstants,
    size_measure: str,
    previous: Optional[StudyLevel],
) -> StudyLevel:
    problem = case.to_problem(k, kappa_lo, kappa_hi, tau, tau_boundary, lipschitz)
    fitted = build_mesh_for_degree(boundary, h, k, kappa_lo, kappa_hi, problem.tau_bar, policy)
    mesh, transfer, admissibility = fitted.mesh, fitted.transfer, fitted.report
    disc = HDGDiscretization(mesh, transfer, k, tau, tau_boundary)

    initial = None
    if previous is not None and previous.solution is not None and previous.disc is not None:
        sigma = previous.solution.sigma
        initial = DiscreteSolution(
            degree=k,
            q=np.zeros((mesh.n_elements, 2, disc.n)),
            u=prolongate_iterate(previous.disc, previous.solution.u, disc),
            uhat=np.zeros((mesh.n_faces, disc.nf)),
            sigma=prolongate_iterate(previous.disc, sigma, disc) if sigma is not None else None,
        )
    solution, trace = solve(problem, disc, picard, initial)

    if problem.kappa_variant is KappaVariant.OF_GRAD:
        frozen = FrozenFields.from_gradient_iterate(
            disc.basis, solution.sigma, solution.u, case.kappa, case.source, kappa_lo, kappa_hi
        )
    else:
        frozen = FrozenFields.from_scalar_iterate(disc.basis, solution.u, case.kappa, case.source, kappa_lo, kappa_hi)
    report = compute_errors(
        case, solution, disc, kappa_lo, kappa_hi, h=h if size_measure == "target" else None, frozen=frozen
    )
    conservation = float(local_conservation_residuals(disc, frozen, solution).max())
    return StudyLevel(
        h=h,
        report=report,
        trace=trace,
        admissibility=admissibility,
        conservation=conservation,
        smallness=smallness_diagnostics(case.kappa_variant, mesh.mesh_size_h, kappa_hi, lipschitz),
        gap_fraction=fitted.gap_fraction,
        solution=solution,
        disc=disc,
    )


def run_convergence_study(
    boundary: DomainBoundary,
    case: ManufacturedCase,
    k: int,
    h_values: Sequence[float],
    kappa_lo: float,
    kappa_hi: float,
    tau: float = 1.0,
    tau_boundary: Optional[float] = None,
    picard: Optional[PicardOptions] = None,
    policy: Optional[MeshPolicy] = None,
    bands: Optional[AcceptanceBands] = None,
    lipschitz: Optional[LipschitzConstants] = None,
    max_workers: int = 1,
    size_measure: str = "target",
) -> StudyResult:
    """
    Solve a manufactured case on a mesh sequence and measure convergence rates.

    With max_workers == 1 each level is seeded by prolongating the previous
    level's solution; concurrent levels start from zero.

    Args:
        boundary: Physical boundary
        case: Manufactured case
        k: Polynomial degree
        h_values: Target mesh sizes, strictly decreasing
        kappa_lo: Lower diffusivity bound
        kappa_hi: Upper diffusivity bound
        tau: Interior stabilization
        tau_boundary: Boundary-face stabilization
        picard: Iteration controls
        policy: Mesh policy
        bands: Acceptance bands
        lipschitz: Lipschitz metadata for the smallness diagnostics
        max_workers: Levels evaluated concurrently
        size_measure: "target" records the requested h for rates, "max" the
            measured largest element diameter

    Returns:
        StudyResult

    Raises:
        ConfigurationError: If fewer than two sizes are given or they do not decrease
    """
    h_values = [float(h) for h in h_values]
    if len(h_values) < 2 or any(b >= a for a, b in zip(h_values, h_values[1:])):
        raise ConfigurationError("a study needs at least two strictly decreasing mesh sizes", "mesh.h")
    picard = picard or PicardOptions()
    bands = bands or AcceptanceBands()
    lipschitz = lipschitz or LipschitzConstants()
    args = (boundary, case, k)
    rest = (kappa_lo, kappa_hi, tau, tau_boundary, picard, policy, lipschitz, size_measure)

    levels: List[StudyLevel] = []
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(_level, *args, h, *rest, None) for h in h_values]
            levels = [f.result() for f in futures]
    else:
        for h in h_values:
            levels.append(_level(*args, h, *rest, levels[-1] if levels else None))
            logger.info(f"Study level h={h:.4g} done: {levels[-1].summary()}")
    for level in levels:
        # release per-level arrays
        level.solution = None
        level.disc = None

    rates = eoc([level.report for level in levels])
    verdict = acceptance_verdict(rates, k, bands.checked_norms(case.kappa_variant), bands)
    verdict["admissible"] = all(level.admissibility.overall_ok for level in levels)
    verdict["max_conservation_residual"] = max(level.conservation for level in levels)
    logger.info(f"Convergence study k={k}: {'passed' if verdict['passed'] else 'failed'}")
    return StudyResult(k=k, variant=case.kappa_variant, levels=levels, rates=rates, verdict=verdict)
