"""MILP formulations of the reservation problem and the two baseline schemes.

Both programs are built over integer quanta of time.  Variable families:

=============  ============  ==========================================
family         shape         meaning
=============  ============  ==========================================
cyber_r        (W, V)        reserved cyber quanta
physical_r     (W, X)        reserved physical quanta
edge_r         (W, Z)        server z reserved for user w (0/1)
people_r       (W, Y)        reserved people quanta
cyber_o        (S, W, V)     on-demand cyber quanta in scenario s
physical_o     (S, W, X)     on-demand physical quanta
edge_o         (S, W, Z)     server z rented on demand for user w (0/1)
outsource      (S, W)        outsourced people quanta for user w
=============  ============  ==========================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Sequence

import numpy as np

from .milp import MilpProblem, ProblemBuilder, SolverConfig, SolveResult, Status, solve_milp
from .model import (
    AllocationPlan,
    CostBreakdown,
    DemandScenario,
    FirstStage,
    Instance,
    ResourceCatalog,
    Recourse,
    ScenarioSet,
    TimeQuantum,
    UnitDemand,
    evaluate_plan,
    expected_demand,
    recourse_costs,
    validate,
)

DEFAULT_HORIZON_HOURS = 24.0
FIRST_STAGE = ("cyber_r", "physical_r", "edge_r", "people_r")
SECOND_STAGE = ("cyber_o", "physical_o", "edge_o", "outsource")


class SolveError(RuntimeError):
    """The solver did not return an optimal solution."""

    def __init__(self, status: Status, message: str, diagnostics: Sequence[str] = ()):
        self.status = status
        self.diagnostics = tuple(diagnostics)
        detail = f"{message} (status={status.value})"
        if self.diagnostics:
            detail += ": " + "; ".join(self.diagnostics)
        super().__init__(detail)


class RecourseInfeasibleError(SolveError):
    def __init__(self, message: str):
        super().__init__(Status.INFEASIBLE, message)


@dataclass
class VariableIndexMap:
    """Bijection between (family, index) and dense MILP variable ids."""

    users: int
    shape: tuple[int, int, int, int]  # (V, X, Z, Y)
    num_scenarios: int
    families: dict[str, np.ndarray] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)
    _reverse: dict[int, tuple[str, tuple[int, ...]]] | None = field(default=None, repr=False)

    def register(self, family: str, ids: np.ndarray) -> None:
        self.families[family] = ids
        self._reverse = None

    def ids(self, family: str) -> np.ndarray:
        return self.families[family]

    def locate(self, vid: int) -> tuple[str, tuple[int, ...]]:
        if self._reverse is None:
            self._reverse = {}
            for name, arr in self.families.items():
                for idx in np.ndindex(arr.shape):
                    self._reverse[int(arr[idx])] = (name, idx)
        return self._reverse[vid]

    def __len__(self) -> int:
        return sum(arr.size for arr in self.families.values())


def _grid(builder: ProblemBuilder, shape, kind: str, upper, cost, name: str) -> np.ndarray:
    upper = np.broadcast_to(np.asarray(upper, dtype=float), shape)
    cost = np.broadcast_to(np.asarray(cost, dtype=float), shape)
    ids = np.empty(shape, dtype=np.int64)
    for idx in np.ndindex(*shape):
        ids[idx] = builder.add_variable(kind, 0.0, float(upper[idx]), float(cost[idx]), f"{name}{list(idx)}")
    return ids


def capacity_units(catalog: ResourceCatalog) -> tuple[np.ndarray, Fraction]:
    """Edge capacities as integer multiples of their greatest common divisor.

    Server assignments are integral, so ``sum_z I_z m_z >= F`` is equivalent to
    ``sum_z (I_z / g) m_z >= ceil(F / g)``.  The second form has the same integer
    solutions and a much tighter relaxation.
    """
    if not catalog.edge:
        return np.zeros(0, dtype=np.int64), Fraction(1)
    fracs = [Fraction(r.capacity_gb).limit_denominator(10**6) for r in catalog.edge]
    num = reduce(math.gcd, (f.numerator for f in fracs))
    den = reduce(math.lcm, (f.denominator for f in fracs))
    g = Fraction(num, den)
    return np.array([int(f / g) for f in fracs], dtype=np.int64), g


def data_units(data_gb: np.ndarray, g: Fraction) -> np.ndarray:
    """Required capacity units per user, rounded up."""
    return np.maximum(np.ceil(np.asarray(data_gb, dtype=float) / float(g) - 1e-9), 0).astype(np.int64)


def _people_caps(catalog: ResourceCatalog, quantum: TimeQuantum) -> np.ndarray:
    return np.array(
        [math.floor(r.capacity_hours / quantum.hours + 1e-9) for r in catalog.people], dtype=np.int64
    )


def _hour_cap(units: Sequence[UnitDemand], quantum: TimeQuantum, horizon_hours: float) -> int:
    biggest = max(
        [int(np.max(u.cyber, initial=0)) for u in units]
        + [int(np.max(u.physical, initial=0)) for u in units]
        + [int(np.max(u.people, initial=0)) for u in units]
    )
    return max(biggest, math.ceil(horizon_hours / quantum.hours - 1e-9))


def build_dip(
    catalog: ResourceCatalog,
    demand: DemandScenario,
    quantum: TimeQuantum | None = None,
    horizon_hours: float = DEFAULT_HORIZON_HOURS,
) -> tuple[MilpProblem, VariableIndexMap]:
    """Reservation-only program for known demand; demand rows are equalities."""
    quantum = quantum or TimeQuantum()
    V, X, Z, Y = catalog.shape
    W = demand.num_users
    d = demand.units(quantum)
    q = quantum.hours
    cap = _hour_cap([d], quantum, horizon_hours)
    people_cap = _people_caps(catalog, quantum)
    coef, g = capacity_units(catalog)

    b = ProblemBuilder()
    vmap = VariableIndexMap(W, catalog.shape, 1)
    cr = _grid(b, (W, V), "integer", cap, [q * r.reserve_cost for r in catalog.cyber], "cyber_r")
    pr = _grid(b, (W, X), "integer", cap, [q * r.reserve_cost for r in catalog.physical], "physical_r")
    er = _grid(b, (W, Z), "binary", 1, [r.reserve_cost for r in catalog.edge], "edge_r")
    hr = _grid(b, (W, Y), "integer", people_cap, [q * r.reserve_cost for r in catalog.people], "people_r")
    for name, ids in zip(FIRST_STAGE, (cr, pr, er, hr)):
        vmap.register(name, ids)

    for w in range(W):
        for v in range(V):
            b.add_constraint([(cr[w, v], 1)], "=", d.cyber[w, v], f"cyber_demand[{w},{v}]")
    for w in range(W):
        for x in range(X):
            b.add_constraint([(pr[w, x], 1)], "=", d.physical[w, x], f"physical_demand[{w},{x}]")
    for y in range(Y):
        for w in range(W):
            avail = int(d.availability[w, y])
            b.add_constraint([(hr[w, y], avail)], "=", d.people[w, y], f"people_demand[{w},{y}]")
            if avail == 0 and d.people[w, y] > 0:
                vmap.diagnostics.append(
                    f"user {w} demands {d.people[w, y]} units of unavailable people resource {catalog.people[y].id!r}"
                )
    for y in range(Y):
        b.add_constraint([(hr[w, y], 1) for w in range(W)], "<=", people_cap[y], f"people_capacity[{y}]")
    need = data_units(d.data_gb, g)
    for w in range(W):
        b.add_constraint([(er[w, z], coef[z]) for z in range(Z)], ">=", need[w], f"edge_data[{w}]")
    for z in range(Z):
        b.add_constraint([(er[w, z], 1) for w in range(W)], "<=", 1, f"edge_once[{z}]")
    return b.build(), vmap


def build_sip(
    catalog: ResourceCatalog,
    scenarios: ScenarioSet,
    quantum: TimeQuantum | None = None,
    horizon_hours: float = DEFAULT_HORIZON_HOURS,
) -> tuple[MilpProblem, VariableIndexMap]:
    """Deterministic equivalent of the two-stage program.

    Second-stage variables are replicated per scenario and weighted by the
    scenario probability in the objective.
    """
    quantum = quantum or TimeQuantum()
    V, X, Z, Y = catalog.shape
    W = scenarios.num_users
    S = len(scenarios)
    q = quantum.hours
    units = [s.units(quantum) for s in scenarios.scenarios]
    probs = scenarios.probabilities
    cap = _hour_cap(units, quantum, horizon_hours)
    people_cap = _people_caps(catalog, quantum)
    coef, g = capacity_units(catalog)

    b = ProblemBuilder()
    vmap = VariableIndexMap(W, catalog.shape, S)
    cr = _grid(b, (W, V), "integer", cap, [q * r.reserve_cost for r in catalog.cyber], "cyber_r")
    pr = _grid(b, (W, X), "integer", cap, [q * r.reserve_cost for r in catalog.physical], "physical_r")
    er = _grid(b, (W, Z), "binary", 1, [r.reserve_cost for r in catalog.edge], "edge_r")
    hr = _grid(b, (W, Y), "integer", people_cap, [q * r.reserve_cost for r in catalog.people], "people_r")
    co = np.stack(
        [_grid(b, (W, V), "integer", cap, [p * q * r.ondemand_cost for r in catalog.cyber], f"cyber_o{s}") for s, p in enumerate(probs)]
    ).reshape(S, W, V)
    po = np.stack(
        [_grid(b, (W, X), "integer", cap, [p * q * r.ondemand_cost for r in catalog.physical], f"physical_o{s}") for s, p in enumerate(probs)]
    ).reshape(S, W, X)
    eo = np.stack(
        [_grid(b, (W, Z), "binary", 1, [p * r.ondemand_cost for r in catalog.edge], f"edge_o{s}") for s, p in enumerate(probs)]
    ).reshape(S, W, Z)
    ho = np.stack(
        [_grid(b, (W,), "integer", cap, p * q * catalog.outsource_rate, f"outsource{s}") for s, p in enumerate(probs)]
    ).reshape(S, W)
    for name, ids in zip(FIRST_STAGE + SECOND_STAGE, (cr, pr, er, hr, co, po, eo, ho)):
        vmap.register(name, ids)

    for s, d in enumerate(units):
        for w in range(W):
            for v in range(V):
                b.add_constraint([(cr[w, v], 1), (co[s, w, v], 1)], ">=", d.cyber[w, v], f"cyber_cover[{s},{w},{v}]")
    for s, d in enumerate(units):
        for w in range(W):
            for x in range(X):
                b.add_constraint([(pr[w, x], 1), (po[s, w, x], 1)], ">=", d.physical[w, x], f"physical_cover[{s},{w},{x}]")
    for s, d in enumerate(units):
        for y in range(Y):
            for w in range(W):
                b.add_constraint(
                    [(hr[w, y], int(d.availability[w, y])), (ho[s, w], 1)], ">=", d.people[w, y], f"people_cover[{s},{w},{y}]"
                )
    for y in range(Y):
        b.add_constraint([(hr[w, y], 1) for w in range(W)], "<=", people_cap[y], f"people_capacity[{y}]")
    for z in range(Z):
        b.add_constraint([(er[w, z], 1) for w in range(W)], "<=", 1, f"edge_once_reserved[{z}]")
    for s in range(S):
        for z in range(Z):
            b.add_constraint([(eo[s, w, z], 1) for w in range(W)], "<=", 1, f"edge_once_ondemand[{s},{z}]")
    for s, d in enumerate(units):
        need = data_units(d.data_gb, g)
        for w in range(W):
            terms = [(er[w, z], coef[z]) for z in range(Z)] + [(eo[s, w, z], coef[z]) for z in range(Z)]
            b.add_constraint(terms, ">=", need[w], f"edge_data[{s},{w}]")
    for s in range(S):
        for w in range(W):
            for z in range(Z):
                b.add_constraint([(er[w, z], 1), (eo[s, w, z], 1)], "<=", 1, f"edge_one_plan[{s},{w},{z}]")
    return b.build(), vmap


def census(W: int, V: int, X: int, Z: int, Y: int, S: int, kind: str = "sip") -> tuple[int, int]:
    """Expected (variables, constraints) of a generated program."""
    first = W * (V + X + Z + Y)
    if kind == "dip":
        return first, W * V + W * X + W * Y + Y + W + Z
    variables = first + S * W * (V + X + Z + 1)
    constraints = S * W * V + S * W * X + S * W * Y + Y + Z + S * Z + S * W + S * W * Z
    return variables, constraints


def extract_plan(result: SolveResult, vmap: VariableIndexMap) -> AllocationPlan:
    if result.status is not Status.OPTIMAL:
        raise SolveError(result.status, "cannot extract a plan from a non-optimal result", vmap.diagnostics)
    x = np.rint(result.values).astype(np.int64)
    W, (V, X, Z, Y), S = vmap.users, vmap.shape, vmap.num_scenarios

    def take(family: str, shape) -> np.ndarray:
        if family in vmap.families:
            return x[vmap.ids(family)]
        return np.zeros(shape, dtype=np.int64)

    return AllocationPlan(
        take("cyber_r", (W, V)),
        take("physical_r", (W, X)),
        take("edge_r", (W, Z)),
        take("people_r", (W, Y)),
        take("cyber_o", (S, W, V)),
        take("physical_o", (S, W, X)),
        take("edge_o", (S, W, Z)),
        take("outsource", (S, W)),
    )


@dataclass
class Solution:
    plan: AllocationPlan
    costs: CostBreakdown
    result: SolveResult
    index_map: VariableIndexMap

    @property
    def objective(self) -> float:
        return float(self.result.objective)


def solve_sip(instance: Instance, config: SolverConfig | None = None, extra_constraints=()) -> Solution:
    problem, vmap = build_sip(instance.catalog, instance.scenarios, instance.quantum)
    if extra_constraints:
        problem = problem.with_constraints(extra_constraints(vmap) if callable(extra_constraints) else extra_constraints)
    result = solve_milp(problem, config)
    if result.status is not Status.OPTIMAL:
        raise SolveError(result.status, "stochastic program not solved to optimality", vmap.diagnostics)
    plan = extract_plan(result, vmap)
    return Solution(plan, evaluate_plan(plan, instance), result, vmap)


def solve_dip(instance: Instance, demand: DemandScenario | None = None, config: SolverConfig | None = None) -> Solution:
    """Solve the deterministic program on ``demand`` (default: the instance's single scenario)."""
    if demand is None:
        if len(instance.scenarios) != 1:
            raise ValueError("the deterministic program needs a single demand; pass one explicitly")
        demand = instance.scenarios.scenarios[0]
    problem, vmap = build_dip(instance.catalog, demand, instance.quantum)
    result = solve_milp(problem, config)
    if result.status is not Status.OPTIMAL:
        raise SolveError(result.status, "deterministic program not solved to optimality", vmap.diagnostics)
    plan = extract_plan(result, vmap)
    known = validate(instance.catalog, ScenarioSet((demand,), (1.0,)), instance.quantum)
    return Solution(plan, evaluate_plan(plan, known), result, vmap)


# -- exact recourse ------------------------------------------------------------


def solve_recourse(
    first: FirstStage,
    catalog: ResourceCatalog,
    scenario: DemandScenario,
    quantum: TimeQuantum | None = None,
    config: SolverConfig | None = None,
) -> Recourse:
    """Cheapest on-demand purchases covering ``scenario`` given the reservations.

    Hour shortfalls are closed form.  Edge data left uncovered by reserved
    servers is covered by a small server-selection MILP.
    """
    quantum = quantum or TimeQuantum()
    d = scenario.units(quantum)
    cyber = np.maximum(d.cyber - first.cyber, 0)
    physical = np.maximum(d.physical - first.physical, 0)
    people_gap = np.maximum(d.people - d.availability * first.people, 0)
    outsourced = people_gap.max(axis=1) if people_gap.shape[1] else np.zeros(len(d.data_gb), dtype=np.int64)
    edge = _edge_recourse(first.edge, catalog, d.data_gb, config)
    cost = sum(recourse_costs(cyber, physical, edge, outsourced, catalog, quantum).values())
    return Recourse(cyber, physical, edge, outsourced, float(cost))


def _edge_recourse(reserved: np.ndarray, catalog: ResourceCatalog, data_gb: np.ndarray, config) -> np.ndarray:
    W, Z = reserved.shape
    edge = np.zeros((W, Z), dtype=np.int64)
    coef, g = capacity_units(catalog)
    residual = data_units(data_gb, g) - (reserved @ coef if Z else 0)
    users = [w for w in range(W) if residual[w] > 0]
    if not users:
        return edge
    b = ProblemBuilder()
    ids: dict[tuple[int, int], int] = {}
    for w in users:
        for z in range(Z):
            if not reserved[w, z]:
                ids[w, z] = b.add_variable("binary", cost=catalog.edge[z].ondemand_cost)
    for w in users:
        b.add_constraint([(ids[w, z], coef[z]) for z in range(Z) if (w, z) in ids], ">=", residual[w])
    for z in range(Z):
        terms = [(ids[w, z], 1) for w in users if (w, z) in ids]
        if len(terms) > 1:
            b.add_constraint(terms, "<=", 1)
    result = solve_milp(b.build(), config)
    if result.status is not Status.OPTIMAL:
        raise RecourseInfeasibleError("not enough edge capacity to store the shared data even with every server")
    for (w, z), vid in ids.items():
        edge[w, z] = int(round(result.values[vid]))
    return edge


def plan_from_first_stage(
    first: FirstStage, instance: Instance, config: SolverConfig | None = None
) -> AllocationPlan:
    recourse = [
        solve_recourse(first, instance.catalog, s, instance.quantum, config) for s in instance.scenarios.scenarios
    ]
    return AllocationPlan.from_stages(first, recourse)


# -- baselines -------------------------------------------------------------------


def _clip_people(people: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """Trim reservations so each people resource stays within capacity, users in id order."""
    people = people.copy()
    for y, cap in enumerate(caps):
        remaining = int(cap)
        for w in range(people.shape[0]):
            people[w, y] = min(people[w, y], remaining)
            remaining -= people[w, y]
    return people


def build_evf(instance: Instance, config: SolverConfig | None = None) -> AllocationPlan:
    """Reserve the (quantized) average demand, then buy exact recourse per scenario."""
    catalog, quantum = instance.catalog, instance.quantum
    mean = expected_demand(instance.scenarios)
    d = mean.units(quantum)
    W = mean.num_users
    Z = len(catalog.edge)
    people = _clip_people(d.people * d.availability, _people_caps(catalog, quantum))

    edge = np.zeros((W, Z), dtype=np.int64)
    order = sorted(range(Z), key=lambda z: (-catalog.edge[z].capacity_gb, z))
    taken: set[int] = set()
    for w in range(W):
        stored = 0.0
        for z in order:
            if stored >= d.data_gb[w] - 1e-9:
                break
            if z in taken:
                continue
            edge[w, z] = 1
            taken.add(z)
            stored += catalog.edge[z].capacity_gb
    first = FirstStage(d.cyber, d.physical, edge, people)
    return plan_from_first_stage(first, instance, config)


def build_random(instance: Instance, seed: int, config: SolverConfig | None = None) -> AllocationPlan:
    """Random first stage, uniform over ``0..max scenario demand`` per variable, exact recourse."""
    catalog, quantum = instance.catalog, instance.quantum
    units = [s.units(quantum) for s in instance.scenarios.scenarios]
    rng = np.random.default_rng(seed)

    def draw(name: str) -> np.ndarray:
        hi = np.max(np.stack([getattr(u, name) for u in units]), axis=0)
        return rng.integers(0, hi + 1) if hi.size else hi.copy()

    cyber = draw("cyber")
    physical = draw("physical")
    people = _clip_people(draw("people"), _people_caps(catalog, quantum))
    W, Z = instance.num_users, len(catalog.edge)
    coin = rng.random((W, Z)) < 0.5
    edge = np.zeros((W, Z), dtype=np.int64)
    for z in range(Z):
        winners = np.flatnonzero(coin[:, z])
        if winners.size:
            edge[winners[0], z] = 1
    first = FirstStage(cyber, physical, edge, people)
    return plan_from_first_stage(first, instance, config)
