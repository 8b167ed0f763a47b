"""
Picard drivers for the quasilinear problem.
"""
from .picard import (
    IterationTrace,
    PicardOptions,
    boundary_data_smallness,
    picard_step,
    prolongate_iterate,
    solve,
    solve_kappa_grad,
    solve_kappa_u,
)

__all__ = [
    "IterationTrace",
    "PicardOptions",
    "boundary_data_smallness",
    "picard_step",
    "prolongate_iterate",
    "solve",
    "solve_kappa_grad",
    "solve_kappa_u",
]
