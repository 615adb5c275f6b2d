"""Implicit-Euler DAE solving with adjoint-based QoI error estimation.

The package solves semi-explicit index-1 and Hessenberg index-2 DAEs with
BDF-1 and quantifies the time-discretization error in user-specified
quantities of interest, either through the adjoint of the DAE itself or
through the adjoint of its index-reduced ODE.
"""

from .adjoint import (
    AdjointSolution,
    LinearizedOps,
    linearized_ops_at,
    projector,
    solve_adjoint_backward,
    terminal_condition,
)
from .core import (
    DAEProblem,
    QoISpec,
    TimeGrid,
    Trajectory,
    check_consistency,
)
from .estimator import (
    ErrorReport,
    cancellation_split,
    effectivity,
    estimate_error,
    reference_qoi_error,
)
from .forward import NewtonSettings, bdf1_solve
from .problems import build_problem, problem_names
from .reduction import ReducedODE, reduced_rhs, solve_reference

__version__ = "0.1.0"

__all__ = [
    "AdjointSolution",
    "DAEProblem",
    "ErrorReport",
    "LinearizedOps",
    "NewtonSettings",
    "QoISpec",
    "ReducedODE",
    "TimeGrid",
    "Trajectory",
    "bdf1_solve",
    "build_problem",
    "cancellation_split",
    "check_consistency",
    "effectivity",
    "estimate_error",
    "linearized_ops_at",
    "problem_names",
    "projector",
    "reduced_rhs",
    "reference_qoi_error",
    "solve_adjoint_backward",
    "solve_reference",
    "terminal_condition",
]
