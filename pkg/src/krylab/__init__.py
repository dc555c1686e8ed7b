"""Krylov solvability lab: operators, Krylov engines, structural diagnostics
and weak-gap estimates for finite-dimensional models of inverse problems."""
from .diagnostics import (krylov_intersection, reducibility, solution_distance_trace, vector_class,
                          verdict)
from .errors import (InvalidInput, KrylabError, NoSolution, NotFriedrichs, NotPositive,
                     PreconditionFailed, SingularOperator, TruncationSingular)
from .gallery import (PrototypeSpec, ShiftSpec, build_compact_normal, build_friedrichs_1d,
                      build_prototype, build_shift, check_friedrichs_pair)
from .hilbert import DenseOperator, Frame, dense_solve, min_norm_solve, principal_angles
from .krylov import krylov_basis, run_cg, run_gmres, solve_truncated
from .weakgap import WeakNormWeights, dw_directed, dw_hat, weak_norm

__version__ = "0.1.0"

__all__ = [
    "DenseOperator", "Frame", "InvalidInput", "KrylabError", "NoSolution", "NotFriedrichs",
    "NotPositive", "PreconditionFailed", "PrototypeSpec", "ShiftSpec", "SingularOperator",
    "TruncationSingular", "WeakNormWeights", "build_compact_normal", "build_friedrichs_1d",
    "build_prototype", "build_shift", "check_friedrichs_pair", "dense_solve", "dw_directed",
    "dw_hat", "krylov_basis", "krylov_intersection", "min_norm_solve", "principal_angles",
    "reducibility", "run_cg", "run_gmres", "solution_distance_trace", "solve_truncated",
    "vector_class", "verdict", "weak_norm",
]
