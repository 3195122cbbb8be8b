"""Best-bound branch-and-bound over the simplex relaxation."""

from __future__ import annotations

import heapq
import itertools
import math

import numpy as np

from .model import MilpProblem, ModelError, SolveResult, SolveStats, SolverConfig, Status
from .simplex import solve_lp_bounds


def _most_fractional(x: np.ndarray, mask: np.ndarray, tol: float) -> int:
    """Index of the integer variable farthest from integrality, lowest id on ties; -1 if none."""
    frac = np.abs(x - np.round(x))
    frac[~mask] = 0.0
    j = int(np.argmax(frac))  # argmax returns the first maximum
    return j if frac[j] > tol else -1


def solve_milp(problem: MilpProblem, config: SolverConfig | None = None) -> SolveResult:
    """Solve ``problem`` to proven optimality.

    Nodes are explored in order of their relaxation bound (ties go to the
    deeper node, then to creation order).  When ``config.node_limit`` nodes
    have been processed the search stops with status ``node-limit`` and the
    best incumbent found so far, if any.
    """
    config = config or SolverConfig()
    mask = problem.integer_mask
    if np.any(mask & ~np.isfinite(problem.upper)):
        bad = int(np.flatnonzero(mask & ~np.isfinite(problem.upper))[0])
        raise ModelError(f"integer variable {bad} needs a finite upper bound for branch-and-bound")

    lower0 = problem.lower.copy()
    upper0 = problem.upper.copy()
    lower0[mask] = np.ceil(lower0[mask] - config.integrality_tol)
    upper0[mask] = np.floor(upper0[mask] + config.integrality_tol)

    stats = SolveStats()
    best_x: np.ndarray | None = None
    best_obj = math.inf
    counter = itertools.count()

    def relax(lo: np.ndarray, hi: np.ndarray) -> SolveResult:
        res = solve_lp_bounds(problem, lo, hi, config)
        stats.lp_iterations += res.stats.lp_iterations
        return res

    root = relax(lower0, upper0)
    stats.nodes = 1
    if root.status is Status.UNBOUNDED:
        return SolveResult(Status.UNBOUNDED, stats=stats)
    if root.status is Status.INFEASIBLE:
        return SolveResult(Status.INFEASIBLE, stats=stats)
    if not mask.any():
        return SolveResult(Status.OPTIMAL, root.values, root.objective, stats)

    # heap entries: (bound, -depth, seq, lower, upper, lp_values)
    heap = [(root.objective, 0, next(counter), lower0, upper0, root.values)]
    hit_limit = False
    while heap:
        bound, neg_depth, _, lo, hi, x = heapq.heappop(heap)
        if bound >= best_obj - config.objective_tol:
            continue
        j = _most_fractional(x, mask, config.integrality_tol)
        if j < 0:
            xi = x.copy()
            xi[mask] = np.round(xi[mask])
            obj = problem.evaluate(xi)
            if obj < best_obj:
                best_obj, best_x = obj, xi
            continue
        for child_lo, child_hi in _children(lo, hi, j, x[j]):
            if stats.nodes >= config.node_limit:
                hit_limit = True
                break
            res = relax(child_lo, child_hi)
            stats.nodes += 1
            if res.status is not Status.OPTIMAL:
                continue
            if res.objective >= best_obj - config.objective_tol:
                continue
            if _most_fractional(res.values, mask, config.integrality_tol) < 0:
                xi = res.values.copy()
                xi[mask] = np.round(xi[mask])
                best_obj, best_x = problem.evaluate(xi), xi
                continue
            heapq.heappush(
                heap, (res.objective, neg_depth - 1, next(counter), child_lo, child_hi, res.values)
            )
        if hit_limit:
            break

    if hit_limit:
        return SolveResult(Status.NODE_LIMIT, best_x, None if best_x is None else best_obj, stats)
    if best_x is None:
        return SolveResult(Status.INFEASIBLE, stats=stats)
    return SolveResult(Status.OPTIMAL, best_x, best_obj, stats)


def _children(lo: np.ndarray, hi: np.ndarray, j: int, value: float):
    down_hi = hi.copy()
    down_hi[j] = math.floor(value)
    yield lo, down_hi
    up_lo = lo.copy()
    up_lo[j] = math.ceil(value)
    yield up_lo, hi
