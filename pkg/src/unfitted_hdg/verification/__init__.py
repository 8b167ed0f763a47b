"""
Manufactured solutions, error norms, convergence rates and reports.
"""
from .delta import DeltaDiagnostic, delta_diagnostic, delta_values
from .eoc import eoc, eoc_table, rate
from .errors import ErrorReport, compute_errors
from .manufactured import ManufacturedCase, make_manufactured
from .projection_checks import random_triangles, run_projection_checks
from .reports import read_csv, write_csv, write_gnuplot, write_json, write_solution, write_study
from .study import (
    AcceptanceBands,
    StudyLevel,
    StudyResult,
    acceptance_verdict,
    run_convergence_study,
    smallness_diagnostics,
)

__all__ = [
    "AcceptanceBands",
    "DeltaDiagnostic",
    "ErrorReport",
    "ManufacturedCase",
    "StudyLevel",
    "StudyResult",
    "acceptance_verdict",
    "compute_errors",
    "delta_diagnostic",
    "delta_values",
    "eoc",
    "eoc_table",
    "make_manufactured",
    "random_triangles",
    "rate",
    "read_csv",
    "run_convergence_study",
    "run_projection_checks",
    "smallness_diagnostics",
    "write_csv",
    "write_gnuplot",
    "write_json",
    "write_solution",
    "write_study",
]
