"""
Main solver - orchestrates mesh generation, admissibility checks, Picard
solves, convergence studies and report writing for one run configuration.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ..geometry.boundary import DomainBoundary, boundary_from_config
from ..geometry.expressions import compile_expression
from ..hdg.discretization import HDGDiscretization
from ..hdg.fields import FrozenFields
from ..hdg.skeleton import build_skeleton_system, dump_skeleton, local_conservation_residuals
from ..mesh.admissibility import AdmissibilityReport, FittedMesh, build_mesh_for_degree, patch_coverage
from ..mesh.generator import MeshPolicy
from ..mesh.mesh_io import write_mesh
from ..nonlinear.picard import PicardOptions, solve
from ..verification.errors import compute_errors
from ..verification.manufactured import KAPPA_VARIABLES, SOURCE_VARIABLES, ManufacturedCase, make_manufactured
from ..verification.projection_checks import run_projection_checks
from ..verification.reports import write_json, write_solution, write_study
from ..verification.study import AcceptanceBands, run_convergence_study
from .config import Config
from .errors import AcceptanceFailure, AdmissibilityFailure, ConfigurationError, MaxItersExceeded, UnfittedHDGError
from .problem import KappaVariant, LipschitzConstants, ProblemSpec
from .run_config import RunConfig

logger = logging.getLogger(__name__)

Artifacts = Dict[str, Path]


class UnfittedHDGSolver:
    """Runs one configured subcommand and writes its artifacts."""

    def __init__(self, config: RunConfig, out_dir: Optional[Union[str, Path]] = None, strict: bool = False):
        """
        Initialize the solver.

        Args:
            config: Validated run configuration
            out_dir: Output directory (overrides the environment and the config)
            strict: Treat admissibility failures as fatal
        """
        self.config = config
        self.strict = strict
        self.out_dir = Path(out_dir) if out_dir else Path(Config.output_dir(config.output.directory))
        self.config_hash = config.config_hash()
        self.boundary: DomainBoundary = boundary_from_config(config.boundary.model_dump(exclude_none=True))
        self.variant = KappaVariant(config.problem.kappa_variant)
        self.case: Optional[ManufacturedCase] = None
        if config.problem.manufactured:
            self.case = make_manufactured(
                config.problem.u_exact, config.problem.kappa, self.variant, config.problem.f0
            )
        self.policy = MeshPolicy(**config.mesh.policy_dict())
        self.picard = PicardOptions(**config.picard.model_dump(), residual_tol=config.residual_tol)
        self.lipschitz = LipschitzConstants(**config.problem.lipschitz.model_dump())

        logger.info(f"Unfitted HDG solver initialized ({config.subcommand}, k={config.k}, boundary {self.boundary.name})")

    # ------------------------------------------------------------ building blocks
    def problem(self) -> ProblemSpec:
        """The configured problem, manufactured or given."""
        cfg = self.config
        p = cfg.problem
        if self.case is not None:
            return self.case.to_problem(cfg.k, p.kappa_lo, p.kappa_hi, cfg.tau, cfg.tau_boundary, self.lipschitz)
        source = compile_expression(p.source or "0", SOURCE_VARIABLES)
        f0 = compile_expression(p.f0, SOURCE_VARIABLES)
        return ProblemSpec(
            kappa_variant=self.variant,
            kappa=compile_expression(p.kappa, KAPPA_VARIABLES[self.variant]),
            kappa_lo=p.kappa_lo,
            kappa_hi=p.kappa_hi,
            source=lambda x, y, u: source(x, y, u) + f0(x, y, u),
            g=compile_expression(p.g, ("x", "y")),
            degree=cfg.k,
            tau=cfg.tau,
            tau_boundary=cfg.tau_boundary,
            lipschitz=self.lipschitz,
        )

    def mesh_level(self, h: float) -> FittedMesh:
        """
        Build the mesh, transfer data and admissibility report for one size.

        The inward gap is shrunk below mesh.gap_fraction when the configured
        degree needs it (see build_mesh_for_degree).

        Args:
            h: Target mesh size

        Returns:
            FittedMesh
        """
        cfg = self.config
        tau_bar = max(cfg.tau, cfg.tau_boundary if cfg.tau_boundary is not None else cfg.tau)
        return build_mesh_for_degree(
            self.boundary, h, cfg.k, cfg.problem.kappa_lo, cfg.problem.kappa_hi, tau_bar, self.policy
        )

    def _admit(self, report: AdmissibilityReport, h: float) -> None:
        if report.overall_ok:
            return
        message = f"mesh h={h:.4g} violates admissibility on faces {report.failing_faces[:10]}"
        if self.strict:
            raise AdmissibilityFailure(message)
        logger.warning(f"{message} (continuing, strict mode off)")

    # ------------------------------------------------------------ subcommands
    def check_mesh(self) -> Artifacts:
        """
        Build every configured mesh and write its admissibility report.

        Returns:
            Mapping from artifact name to path
        """
        artifacts: Artifacts = {}
        failures: List[Tuple[AdmissibilityReport, float]] = []
        for i, h in enumerate(self.config.mesh.sizes()):
            fitted = self.mesh_level(h)
            mesh, transfer, report = fitted.mesh, fitted.transfer, fitted.report
            coverage = patch_coverage(mesh, self.boundary)
            document = {
                "h": h,
                "gap_fraction": fitted.gap_fraction,
                "mesh": mesh.summary(),
                "admissibility": report.to_dict(),
                "coverage": coverage.to_dict(),
            }
            artifacts[f"admissibility_{i}"] = write_json(document, self.out_dir / f"admissibility_{i}.json", self.config_hash)
            if self.config.output.export_mesh:
                artifacts[f"mesh_{i}"] = write_mesh(self.out_dir / f"mesh_{i}.txt", mesh, transfer)
            if not report.overall_ok:
                failures.append((report, h))
        for report, h in failures:
            self._admit(report, h)
        return artifacts

    def solve(self) -> Artifacts:
        """
        Solve on the finest configured mesh.

        Returns:
            Mapping from artifact name to path
        """
        cfg = self.config
        h = cfg.mesh.sizes()[-1]
        fitted = self.mesh_level(h)
        mesh, transfer, report = fitted.mesh, fitted.transfer, fitted.report
        artifacts: Artifacts = {
            "admissibility": write_json(report.to_dict(), self.out_dir / "admissibility.json", self.config_hash)
        }
        self._admit(report, h)

        problem = self.problem()
        disc = HDGDiscretization(mesh, transfer, cfg.k, cfg.tau, cfg.tau_boundary)
        try:
            solution, trace = solve(problem, disc, self.picard)
        except MaxItersExceeded as e:
            if e.trace is not None:
                write_json(e.trace.to_dict(), self.out_dir / "trace.json", self.config_hash)
            raise
        artifacts["solution"] = write_solution(solution, self.out_dir / "solution.csv", self.config_hash, cfg.output.float_format)
        artifacts["trace"] = write_json(trace.to_dict(), self.out_dir / "trace.json", self.config_hash)

        if problem.kappa_variant is KappaVariant.OF_GRAD:
            frozen = FrozenFields.from_gradient_iterate(
                disc.basis, solution.sigma, solution.u, problem.kappa, problem.source, problem.kappa_lo, problem.kappa_hi
            )
        else:
            frozen = FrozenFields.from_scalar_iterate(
                disc.basis, solution.u, problem.kappa, problem.source, problem.kappa_lo, problem.kappa_hi
            )
        summary: Dict[str, Any] = {
            "h": h,
            "problem": problem.describe(),
            "mesh": mesh.summary(),
            "gap_fraction": fitted.gap_fraction,
            "solution": solution.summary(),
            "max_conservation_residual": float(local_conservation_residuals(disc, frozen, solution).max()),
        }
        if self.case is not None:
            errors = compute_errors(self.case, solution, disc, problem.kappa_lo, problem.kappa_hi, h=h, frozen=frozen)
            summary["errors"] = errors.to_dict()
        artifacts["summary"] = write_json(summary, self.out_dir / "summary.json", self.config_hash)

        if cfg.output.export_mesh:
            artifacts["mesh"] = write_mesh(self.out_dir / "mesh.txt", mesh, transfer)
        if cfg.output.export_skeleton:
            system, _ = build_skeleton_system(disc, frozen, problem.g, problem.kappa_variant)
            artifacts["skeleton"] = dump_skeleton(system, self.out_dir / "skeleton.txt", f"config-sha256: {self.config_hash}")
        return artifacts

    def study(self) -> Artifacts:
        """
        Run the convergence study over the configured mesh sequence.

        Returns:
            Mapping from artifact name to path

        Raises:
            AcceptanceFailure: If measured rates fall outside the bands
        """
        cfg = self.config
        if self.case is None:
            raise ConfigurationError("a convergence study needs a manufactured solution", "problem.u_exact")
        acceptance = cfg.acceptance
        result = run_convergence_study(
            self.boundary,
            self.case,
            cfg.k,
            cfg.mesh.sizes(),
            cfg.problem.kappa_lo,
            cfg.problem.kappa_hi,
            cfg.tau,
            cfg.tau_boundary,
            self.picard,
            self.policy,
            AcceptanceBands(acceptance.finest_band, acceptance.coarsest_band, acceptance.norms),
            self.lipschitz,
            acceptance.max_workers,
            acceptance.size_measure,
        )
        artifacts = write_study(result, self.out_dir, self.config_hash, cfg.output.float_format)
        for level in result.levels:
            self._admit(level.admissibility, level.h)
        if not result.passed:
            failed = [c for c in result.verdict["checks"] if not c["ok"]]
            raise AcceptanceFailure(f"{len(failed)} rate check(s) outside the acceptance bands: {failed[:3]}")
        return artifacts

    def project_test(self) -> Artifacts:
        """Run the projection self-checks and write them as JSON."""
        cfg = self.config
        checks = run_projection_checks(cfg.k, cfg.project_test.elements, cfg.project_test.fields, cfg.seed)
        return {"project_test": write_json(checks, self.out_dir / "project_test.json", self.config_hash)}

    def run(self) -> int:
        """
        Execute the configured subcommand.

        Returns:
            Exit status: 0 success, 2 configuration, 3 admissibility (strict),
            4 solver failure, 5 acceptance failure
        """
        handlers = {
            "solve": self.solve,
            "study": self.study,
            "check-mesh": self.check_mesh,
            "project-test": self.project_test,
        }
        try:
            np.random.seed(self.config.seed)
            artifacts = handlers[self.config.subcommand]()
            logger.info(f"Run finished: {len(artifacts)} artifact(s) in {self.out_dir}")
            return 0
        except UnfittedHDGError as e:
            logger.error(f"Run failed: {e}")
            return e.exit_code
