"""Small mixed-integer linear programming kernel: simplex, branch-and-bound, enumeration."""

from .branch_and_bound import solve_milp
from .enumeration import EnumerationLimitError, brute_force
from .model import (
    LinearConstraint,
    MilpProblem,
    ModelError,
    ProblemBuilder,
    Relation,
    SolverConfig,
    SolveResult,
    SolveStats,
    Status,
    VariableSpec,
    VarKind,
)
from .simplex import SimplexError, solve_lp

__all__ = [
    "EnumerationLimitError",
    "LinearConstraint",
    "MilpProblem",
    "ModelError",
    "ProblemBuilder",
    "Relation",
    "SimplexError",
    "SolverConfig",
    "SolveResult",
    "SolveStats",
    "Status",
    "VarKind",
    "VariableSpec",
    "brute_force",
    "solve_lp",
    "solve_milp",
]
