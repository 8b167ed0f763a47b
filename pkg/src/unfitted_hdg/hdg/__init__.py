"""
HDG discretization for a frozen diffusion field: local systems, transfer
coupling, static condensation and recovery.
"""
from .discretization import HDGDiscretization
from .fields import FrozenFields
from .local import (
    LocalElementSystem,
    assemble_local,
    assemble_local_gradient_variant,
    solve_local,
    transfer_coupling,
    transfer_couplings,
)
from .monolithic import assemble_monolithic, monolithic_residual, solve_monolithic
from .skeleton import (
    SkeletonSystem,
    build_skeleton_system,
    condense_and_solve,
    dump_skeleton,
    local_conservation_residuals,
)
from .solution import DiscreteSolution

__all__ = [
    "DiscreteSolution",
    "FrozenFields",
    "HDGDiscretization",
    "LocalElementSystem",
    "SkeletonSystem",
    "assemble_local",
    "assemble_local_gradient_variant",
    "assemble_monolithic",
    "build_skeleton_system",
    "condense_and_solve",
    "dump_skeleton",
    "local_conservation_residuals",
    "monolithic_residual",
    "solve_local",
    "solve_monolithic",
    "transfer_coupling",
    "transfer_couplings",
]
