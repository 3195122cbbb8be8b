"""Dense-tableau primal simplex with implicit variable bounds.

Variables are shifted to ``0 <= y <= u - l`` and every row becomes an
equality with its own slack.  Phase 1 minimises the artificial sum, phase 2
the real objective.  Pricing is Dantzig's rule; after a run of degenerate
pivots it falls back to Bland's rule (lowest eligible index, lowest-index
leaving tie break) until progress resumes, which rules out cycling.
"""

from __future__ import annotations

import math

import numpy as np

from .model import MilpProblem, Relation, SolveResult, SolveStats, SolverConfig, Status

_PIVOT_TOL = 1e-9
_COST_TOL = 1e-9
_DEGENERATE_STREAK = 30


class SimplexError(RuntimeError):
    """The iteration guard tripped; indicates numerical trouble, not a model property."""


class _Tableau:
    def __init__(self, A: np.ndarray, rhs: np.ndarray, upper: np.ndarray, basis: np.ndarray):
        self.T = A
        self.beta = rhs
        self.upper = upper
        self.basis = basis
        m, n = A.shape
        self.is_basic = np.zeros(n, dtype=bool)
        self.is_basic[basis] = True
        self.at_upper = np.zeros(n, dtype=bool)
        self.iterations = 0

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        return cost - cost[self.basis] @ self.T

    def run(self, cost: np.ndarray, max_iter: int) -> tuple[str, np.ndarray]:
        """Optimise ``cost`` from the current basis; returns ("optimal"|"unbounded", d)."""
        T, beta, upper = self.T, self.beta, self.upper
        m = T.shape[0]
        d = self.reduced_costs(cost)
        movable = upper > 0
        degenerate = 0
        bland = False
        while True:
            if self.iterations > max_iter:
                raise SimplexError(f"simplex exceeded {max_iter} iterations")
            score = np.where(self.at_upper, d, -d)
            score[self.is_basic | ~movable] = 0.0
            if bland:
                cand = np.flatnonzero(score > _COST_TOL)
                if cand.size == 0:
                    return "optimal", d
                j = int(cand[0])
            else:
                j = int(np.argmax(score))
                if score[j] <= _COST_TOL:
                    return "optimal", d
            self.iterations += 1

            direction = -1.0 if self.at_upper[j] else 1.0
            alpha = T[:, j] * direction  # basic values move by -t * alpha
            t_best = upper[j]
            row = -1
            to_upper = False
            if m:
                dec = alpha > _PIVOT_TOL
                inc = alpha < -_PIVOT_TOL
                ratios = np.full(m, math.inf)
                ratios[dec] = np.maximum(beta[dec], 0.0) / alpha[dec]
                ub_b = upper[self.basis]
                lim = inc & np.isfinite(ub_b)
                ratios[lim] = np.maximum(ub_b[lim] - beta[lim], 0.0) / -alpha[lim]
                r_min = float(ratios.min())
                if r_min < t_best:
                    ties = np.flatnonzero(ratios <= r_min + _PIVOT_TOL)
                    if ties.size == 1:
                        row = int(ties[0])
                    elif bland:
                        row = int(ties[np.argmin(self.basis[ties])])
                    else:
                        row = int(ties[np.argmax(np.abs(alpha[ties]))])
                    t_best = float(ratios[row])
                    to_upper = bool(inc[row])
            if math.isinf(t_best):
                return "unbounded", d

            if t_best <= _PIVOT_TOL:
                degenerate += 1
                if degenerate >= _DEGENERATE_STREAK:
                    bland = True
            else:
                degenerate = 0
                bland = False

            if t_best:
                nz = np.flatnonzero(alpha)
                beta[nz] -= t_best * alpha[nz]
            if row < 0:
                # bound flip, basis unchanged
                self.at_upper[j] = not self.at_upper[j]
                continue

            leaving = int(self.basis[row])
            entering_value = t_best if direction > 0 else upper[j] - t_best
            self.is_basic[leaving] = False
            self.at_upper[leaving] = to_upper
            self.is_basic[j] = True
            self.at_upper[j] = False
            self.basis[row] = j
            beta[row] = entering_value

            pivot_row = T[row] / T[row, j]
            T[row] = pivot_row
            col = T[:, j].copy()
            col[row] = 0.0
            rows = np.flatnonzero(col)
            if rows.size:
                cols = np.flatnonzero(pivot_row)
                T[np.ix_(rows, cols)] -= np.outer(col[rows], pivot_row[cols])
                T[rows, j] = 0.0
            dj = d[j]
            if dj:
                d -= dj * pivot_row
                d[j] = 0.0

    def primal(self) -> np.ndarray:
        y = np.where(self.at_upper, self.upper, 0.0)
        y[self.basis] = self.beta
        return y


def solve_lp(problem: MilpProblem, config: SolverConfig | None = None) -> SolveResult:
    """Solve the continuous relaxation of ``problem``.

    Integrality marks are ignored.  Returns an optimal basic solution, or an
    infeasible/unbounded status.
    """
    return solve_lp_bounds(problem, problem.lower, problem.upper, config)


def solve_lp_bounds(
    problem: MilpProblem,
    lower: np.ndarray,
    upper: np.ndarray,
    config: SolverConfig | None = None,
) -> SolveResult:
    """Solve the relaxation with overridden variable bounds (used by branch-and-bound)."""
    config = config or SolverConfig()
    n = problem.num_variables
    m = problem.num_constraints
    if np.any(lower > upper + config.feasibility_tol):
        return SolveResult(Status.INFEASIBLE, stats=SolveStats(nodes=0, lp_iterations=0))

    A = problem.A
    span = np.maximum(upper - lower, 0.0)
    rhs = problem.b - A @ lower if m else np.zeros(0)

    # row signs and slack columns
    slack_sign = np.array(
        [1.0 if rel is Relation.LE else -1.0 if rel is Relation.GE else 0.0 for rel in problem.relations]
    )
    flip = rhs < 0
    row_sign = np.where(flip, -1.0, 1.0)
    has_slack = slack_sign != 0
    slack_rows = np.flatnonzero(has_slack)
    n_slack = slack_rows.size
    slack_coef = slack_sign[slack_rows] * row_sign[slack_rows]
    basic_slack = slack_coef > 0
    art_rows = np.flatnonzero(~np.isin(np.arange(m), slack_rows[basic_slack]))
    n_art = art_rows.size

    N = n + n_slack + n_art
    T = np.zeros((m, N))
    T[:, :n] = A * row_sign[:, None]
    T[slack_rows, n + np.arange(n_slack)] = slack_coef
    T[art_rows, n + n_slack + np.arange(n_art)] = 1.0
    beta = np.abs(rhs).astype(float)
    up = np.concatenate([span, np.full(n_slack, math.inf), np.full(n_art, math.inf)])
    basis = np.empty(m, dtype=np.int64)
    basis[slack_rows[basic_slack]] = n + np.flatnonzero(basic_slack)
    basis[art_rows] = n + n_slack + np.arange(n_art)

    tab = _Tableau(T, beta, up, basis)
    max_iter = 50 * (m + N) + 1000

    if n_art:
        phase1 = np.zeros(N)
        phase1[n + n_slack :] = 1.0
        tab.run(phase1, max_iter)
        infeas = float(tab.primal()[n + n_slack :].sum())
        if infeas > config.feasibility_tol * max(1.0, float(np.max(np.abs(rhs), initial=0.0))):
            return SolveResult(Status.INFEASIBLE, stats=SolveStats(nodes=0, lp_iterations=tab.iterations))
        # artificials are pinned at zero for phase 2
        up[n + n_slack :] = 0.0
        tab.at_upper[n + n_slack :] = False

    cost = np.zeros(N)
    cost[:n] = problem.c
    outcome, _ = tab.run(cost, max_iter)
    stats = SolveStats(nodes=0, lp_iterations=tab.iterations)
    if outcome == "unbounded":
        return SolveResult(Status.UNBOUNDED, stats=stats)
    y = tab.primal()[:n]
    x = np.clip(y, 0.0, span) + lower
    return SolveResult(Status.OPTIMAL, values=x, objective=problem.evaluate(x), stats=stats)
