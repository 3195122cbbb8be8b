"""Problem representation shared by the LP, branch-and-bound and enumeration solvers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np


class ModelError(ValueError):
    """Raised when a problem is malformed at construction time."""


class VarKind(str, enum.Enum):
    CONTINUOUS = "continuous"
    INTEGER = "integer"
    BINARY = "binary"


class Relation(str, enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NODE_LIMIT = "node-limit"


@dataclass(frozen=True)
class VariableSpec:
    id: int
    kind: VarKind = VarKind.CONTINUOUS
    lower: float = 0.0
    upper: float = math.inf
    name: str = ""

    @property
    def is_integer(self) -> bool:
        return self.kind is not VarKind.CONTINUOUS


@dataclass(frozen=True)
class LinearConstraint:
    terms: tuple[tuple[int, float], ...]
    relation: Relation
    rhs: float
    name: str = ""


@dataclass(frozen=True)
class SolverConfig:
    node_limit: int = 1_000_000
    feasibility_tol: float = 1e-9
    integrality_tol: float = 1e-6
    objective_tol: float = 1e-6


@dataclass
class SolveStats:
    nodes: int = 0
    lp_iterations: int = 0


@dataclass
class SolveResult:
    status: Status
    values: np.ndarray | None = None
    objective: float | None = None
    stats: SolveStats = field(default_factory=SolveStats)

    @property
    def is_optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class MilpProblem:
    """An immutable minimization problem ``min c.x  s.t.  A x (rel) b,  l <= x <= u``.

    Build one with :class:`ProblemBuilder`; the constructor validates every
    reference so solvers never see dangling ids.
    """

    def __init__(
        self,
        variables: Sequence[VariableSpec],
        constraints: Sequence[LinearConstraint],
        objective: Mapping[int, float],
        objective_constant: float = 0.0,
    ):
        variables = tuple(variables)
        constraints = tuple(constraints)
        n = len(variables)
        for i, var in enumerate(variables):
            if var.id != i:
                raise ModelError(f"variable ids must be consecutive from 0; got id {var.id} at position {i}")
            if var.kind is VarKind.BINARY and (var.lower != 0 or var.upper != 1):
                raise ModelError(f"binary variable {i} must have bounds [0, 1]")
            if math.isnan(var.lower) or math.isnan(var.upper) or var.lower > var.upper:
                raise ModelError(f"variable {i} has invalid bounds [{var.lower}, {var.upper}]")
            if math.isinf(var.lower):
                raise ModelError(f"variable {i} must have a finite lower bound")
        for k, con in enumerate(constraints):
            seen = set()
            for vid, _ in con.terms:
                if not 0 <= vid < n:
                    raise ModelError(f"constraint {k} ({con.name or 'unnamed'}) references unknown variable {vid}")
                if vid in seen:
                    raise ModelError(f"constraint {k} ({con.name or 'unnamed'}) repeats variable {vid}")
                seen.add(vid)
            if not math.isfinite(con.rhs):
                raise ModelError(f"constraint {k} has non-finite rhs")
        for vid in objective:
            if not 0 <= vid < n:
                raise ModelError(f"objective references unknown variable {vid}")

        self._variables = variables
        self._constraints = constraints
        self._objective = dict(objective)
        self.objective_constant = float(objective_constant)

        # dense views used by the solvers
        c = np.zeros(n)
        for vid, coef in self._objective.items():
            c[vid] = coef
        A = np.zeros((len(constraints), n))
        for k, con in enumerate(constraints):
            for vid, coef in con.terms:
                A[k, vid] = coef
        for arr in (c, A):
            arr.flags.writeable = False
        self.c = c
        self.A = A
        self.b = np.array([con.rhs for con in constraints], dtype=float)
        self.relations = tuple(con.relation for con in constraints)
        self.lower = np.array([v.lower for v in variables], dtype=float)
        self.upper = np.array([v.upper for v in variables], dtype=float)
        self.integer_mask = np.array([v.is_integer for v in variables], dtype=bool)
        for arr in (self.b, self.lower, self.upper, self.integer_mask):
            arr.flags.writeable = False

    @property
    def variables(self) -> tuple[VariableSpec, ...]:
        return self._variables

    @property
    def constraints(self) -> tuple[LinearConstraint, ...]:
        return self._constraints

    @property
    def objective(self) -> dict[int, float]:
        return dict(self._objective)

    @property
    def num_variables(self) -> int:
        return len(self._variables)

    @property
    def num_constraints(self) -> int:
        return len(self._constraints)

    def relaxed(self) -> "MilpProblem":
        """Copy with every integrality requirement dropped."""
        variables = [
            VariableSpec(v.id, VarKind.CONTINUOUS, v.lower, v.upper, v.name) for v in self._variables
        ]
        return MilpProblem(variables, self._constraints, self._objective, self.objective_constant)

    def with_constraints(self, extra: Iterable[LinearConstraint]) -> "MilpProblem":
        return MilpProblem(
            self._variables, self._constraints + tuple(extra), self._objective, self.objective_constant
        )

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.objective_constant

    def max_violation(self, x: np.ndarray) -> float:
        """Largest constraint or bound violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if len(x):
            worst = max(worst, float(np.max(self.lower - x)), float(np.max(x - self.upper)))
        if self.num_constraints:
            lhs = self.A @ x
            for k, rel in enumerate(self.relations):
                gap = lhs[k] - self.b[k]
                if rel is Relation.LE:
                    worst = max(worst, gap)
                elif rel is Relation.GE:
                    worst = max(worst, -gap)
                else:
                    worst = max(worst, abs(gap))
        return worst


class ProblemBuilder:
    """Mutable accumulator that produces a :class:`MilpProblem`."""

    def __init__(self) -> None:
        self._variables: list[VariableSpec] = []
        self._constraints: list[LinearConstraint] = []
        self._objective: dict[int, float] = {}

    def add_variable(
        self,
        kind: VarKind | str = VarKind.CONTINUOUS,
        lower: float = 0.0,
        upper: float = math.inf,
        cost: float = 0.0,
        name: str = "",
    ) -> int:
        kind = VarKind(kind)
        if kind is VarKind.BINARY:
            lower, upper = 0.0, 1.0
        vid = len(self._variables)
        self._variables.append(VariableSpec(vid, kind, float(lower), float(upper), name))
        if cost:
            self._objective[vid] = float(cost)
        return vid

    def add_constraint(
        self,
        terms: Iterable[tuple[int, float]],
        relation: Relation | str,
        rhs: float,
        name: str = "",
    ) -> int:
        merged: dict[int, float] = {}
        for vid, coef in terms:
            merged[vid] = merged.get(vid, 0.0) + float(coef)
        self._constraints.append(
            LinearConstraint(tuple(merged.items()), Relation(relation), float(rhs), name)
        )
        return len(self._constraints) - 1

    def set_cost(self, vid: int, cost: float) -> None:
        self._objective[vid] = float(cost)

    def build(self) -> MilpProblem:
        return MilpProblem(self._variables, self._constraints, self._objective)
