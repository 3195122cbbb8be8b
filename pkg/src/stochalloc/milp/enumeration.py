"""Exhaustive-enumeration oracle for small integer programs.

Only meant for tests and cross-checks: it walks every integer assignment in
lexicographic order and keeps the first strict improvement, so ties resolve
to the lexicographically smallest assignment.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .model import MilpProblem, ModelError, Relation, SolveResult, SolveStats, SolverConfig, Status
from .simplex import solve_lp_bounds

_CHUNK = 65536


class EnumerationLimitError(ValueError):
    """The integer search space is larger than the caller allowed."""


def brute_force(problem: MilpProblem, limit: int = 1_000_000, config: SolverConfig | None = None) -> SolveResult:
    config = config or SolverConfig()
    mask = problem.integer_mask
    int_ids = np.flatnonzero(mask)
    lo = np.ceil(problem.lower[int_ids] - config.integrality_tol)
    hi = np.floor(problem.upper[int_ids] + config.integrality_tol)
    if np.any(~np.isfinite(hi)):
        raise ModelError("brute_force needs finite bounds on every integer variable")
    sizes = np.maximum(hi - lo + 1, 0).astype(np.int64)
    space = math.prod(int(s) for s in sizes)
    if space > limit:
        raise EnumerationLimitError(f"enumeration space {space} exceeds limit {limit}")
    if space == 0:
        return SolveResult(Status.INFEASIBLE, stats=SolveStats())

    ranges = [range(int(a), int(b) + 1) for a, b in zip(lo, hi)]
    if mask.all():
        return _enumerate_pure(problem, ranges, config)
    return _enumerate_mixed(problem, int_ids, ranges, config)


def _feasible_rows(problem: MilpProblem, X: np.ndarray, tol: float) -> np.ndarray:
    ok = np.ones(len(X), dtype=bool)
    if problem.num_constraints == 0:
        return ok
    lhs = X @ problem.A.T
    for k, rel in enumerate(problem.relations):
        gap = lhs[:, k] - problem.b[k]
        if rel is Relation.LE:
            ok &= gap <= tol
        elif rel is Relation.GE:
            ok &= gap >= -tol
        else:
            ok &= np.abs(gap) <= tol
    return ok


def _enumerate_pure(problem: MilpProblem, ranges, config: SolverConfig) -> SolveResult:
    best_x = None
    best_obj = math.inf
    leaves = 0
    product = itertools.product(*ranges)
    while True:
        chunk = list(itertools.islice(product, _CHUNK))
        if not chunk:
            break
        X = np.array(chunk, dtype=float).reshape(len(chunk), problem.num_variables)
        leaves += len(chunk)
        ok = _feasible_rows(problem, X, config.feasibility_tol)
        if not ok.any():
            continue
        obj = X @ problem.c + problem.objective_constant
        obj[~ok] = math.inf
        k = int(np.argmin(obj))
        if obj[k] < best_obj - config.objective_tol * 1e-3:
            best_obj, best_x = float(obj[k]), X[k].copy()
    stats = SolveStats(nodes=leaves)
    if best_x is None:
        return SolveResult(Status.INFEASIBLE, stats=stats)
    return SolveResult(Status.OPTIMAL, best_x, best_obj, stats)


def _enumerate_mixed(problem: MilpProblem, int_ids: np.ndarray, ranges, config: SolverConfig) -> SolveResult:
    best: SolveResult | None = None
    stats = SolveStats()
    unbounded = False
    for assignment in itertools.product(*ranges):
        lo = problem.lower.copy()
        hi = problem.upper.copy()
        lo[int_ids] = assignment
        hi[int_ids] = assignment
        res = solve_lp_bounds(problem, lo, hi, config)
        stats.nodes += 1
        stats.lp_iterations += res.stats.lp_iterations
        if res.status is Status.UNBOUNDED:
            unbounded = True
            break
        if res.status is Status.OPTIMAL and (best is None or res.objective < best.objective - config.objective_tol * 1e-3):
            best = res
    if unbounded:
        return SolveResult(Status.UNBOUNDED, stats=stats)
    if best is None:
        return SolveResult(Status.INFEASIBLE, stats=stats)
    return SolveResult(Status.OPTIMAL, best.values, best.objective, stats)
