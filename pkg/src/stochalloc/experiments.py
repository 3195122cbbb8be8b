"""Parameter sweeps over the reservation problem.

Four studies are provided: the cost structure as one reservation is pinned,
per-resource costs as the demand probability moves, the probability at which
a resource first gets reserved, and a comparison of the stochastic program
with the expected-value and random schemes as on-demand prices scale.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .formulations import (
    VariableIndexMap,
    build_evf,
    build_random,
    build_sip,
    extract_plan,
    SolveError,
)
from .milp import LinearConstraint, Relation, SolverConfig, Status, solve_milp
from .model import (
    AllocationPlan,
    CyberResource,
    DemandScenario,
    EdgeServer,
    Instance,
    PeopleResource,
    PhysicalResource,
    ResourceCatalog,
    ScenarioSet,
    TimeQuantum,
    evaluate_plan,
    resource_keys,
    validate,
)

DEFAULT_USERS = 10
DEFAULT_EDGE_SERVERS = 20
DEFAULT_TEACHER_HOURS = 40.0
DEFAULT_EDGE_CAPACITY_GB = 1.0


class ExperimentError(ValueError):
    pass


# -- instances -----------------------------------------------------------------


def default_catalog(
    teacher_hours: float = DEFAULT_TEACHER_HOURS,
    edge_servers: int = DEFAULT_EDGE_SERVERS,
    edge_capacity_gb: float = DEFAULT_EDGE_CAPACITY_GB,
) -> ResourceCatalog:
    """Language-school catalog: three software services, one classroom, edge servers, four teachers."""
    return ResourceCatalog(
        cyber=(
            CyberResource("w", 0.017, 0.035),  # writing practice
            CyberResource("s", 0.005, 0.009),  # speaking practice
            CyberResource("l", 0.010, 0.014),  # gamified learning
        ),
        physical=(PhysicalResource("c", 3.5, 4.0),),
        edge=tuple(EdgeServer(f"z{i + 1}", edge_capacity_gb, 0.07625, 0.13875) for i in range(edge_servers)),
        people=tuple(PeopleResource(f"y{i + 1}", teacher_hours, 25.0, 19.6) for i in range(4)),
        outsource_rate=19.6,
    )


def demand_or_idle_scenarios(
    catalog: ResourceCatalog,
    users: int,
    p_demand: float,
    cyber_hours: float = 0.3,
    physical_hours: float = 0.3,
    people_hours: float = 0.4,
    data_gb: float = 0.5,
) -> ScenarioSet:
    """Two scenarios: every user wants every resource while no teacher is available, or nobody wants anything.

    User ``w`` asks for teacher ``w mod Y``.
    """
    V, X, _, Y = catalog.shape
    people = np.zeros((users, Y))
    if Y:
        for w in range(users):
            people[w, w % Y] = people_hours
    busy = DemandScenario(
        np.full((users, V), cyber_hours),
        np.full((users, X), physical_hours),
        people,
        np.zeros((users, Y), dtype=np.int64),
        np.full(users, data_gb),
    )
    idle = DemandScenario.zeros(users, catalog)
    return ScenarioSet((busy, idle), (p_demand, 1.0 - p_demand))


def default_instance(
    p_demand: float = 0.6,
    users: int = DEFAULT_USERS,
    teacher_hours: float = DEFAULT_TEACHER_HOURS,
    quantum: float = 0.1,
) -> Instance:
    catalog = default_catalog(teacher_hours)
    return validate(catalog, demand_or_idle_scenarios(catalog, users, p_demand), TimeQuantum(quantum))


def small_instance(p_first: float = 0.6, quantum: float = 0.1) -> Instance:
    """One user, one resource of each kind (three half-GB servers), two demand scenarios."""
    catalog = ResourceCatalog(
        cyber=(CyberResource("w", 0.017, 0.035),),
        physical=(PhysicalResource("c", 3.5, 4.0),),
        edge=tuple(EdgeServer(f"z{i + 1}", 0.5, 0.07625, 0.13875) for i in range(3)),
        people=(PeopleResource("y1", DEFAULT_TEACHER_HOURS, 25.0, 19.6),),
        outsource_rate=19.6,
    )
    first = DemandScenario([[0.3]], [[0.3]], [[0.4]], [[1]], [0.5])
    second = DemandScenario([[0.5]], [[0.5]], [[0.6]], [[1]], [1.5])
    return validate(catalog, ScenarioSet((first, second), (p_first, 1.0 - p_first)), TimeQuantum(quantum))


# -- targets -----------------------------------------------------------------------


@dataclass(frozen=True)
class Target:
    """A first-stage decision addressed by resource: ``cyber:<id>``, ``physical:<id>``,
    ``people:<id>``, ``edge`` (any server) or ``edge:<id>``."""

    family: str
    index: int | None
    label: str

    def ids(self, vmap: VariableIndexMap) -> np.ndarray:
        arr = vmap.ids(f"{self.family}_r")
        return arr.ravel() if self.index is None else arr[:, self.index]

    def reserved(self, plan: AllocationPlan) -> int:
        arr = getattr(plan, f"reserved_{self.family}")
        return int(arr.sum() if self.index is None else arr[:, self.index].sum())


def parse_target(catalog: ResourceCatalog, spec: str) -> Target:
    family, _, rid = spec.partition(":")
    family = family.strip().lower()
    if family not in ("cyber", "physical", "edge", "people"):
        raise ExperimentError(f"unknown target family {family!r} in {spec!r}")
    if not rid:
        if family != "edge":
            raise ExperimentError(f"target {spec!r} needs a resource id, e.g. {family}:<id>")
        return Target("edge", None, "edge")
    ids = [r.id for r in getattr(catalog, family)]
    if rid not in ids:
        raise ExperimentError(f"no {family} resource with id {rid!r}; known ids: {ids}")
    return Target(family, ids.index(rid), spec)


# -- series -------------------------------------------------------------------------


@dataclass
class SweepSeries:
    """One record per grid point, in grid order."""

    parameter: str
    columns: list[str]
    rows: list[dict] = field(default_factory=list)

    def column(self, name: str) -> list:
        return [row[name] for row in self.rows]

    def to_csv(self, stream: TextIO | None = None) -> str:
        out = stream or io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(row[c]) for c in self.columns])
        return out.getvalue() if stream is None else ""


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float) or isinstance(value, np.floating):
        value = float(value)
        if value == 0:
            value = 0.0  # no "-0.000000"
        return f"{value:.6f}"
    return str(value)


def _check_grid(grid: Sequence[float], name: str) -> list:
    grid = list(grid)
    if not grid:
        raise ExperimentError(f"{name} grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ExperimentError(f"{name} grid must be strictly increasing")
    return grid


def _resource_columns(catalog: ResourceCatalog) -> list[str]:
    cols = []
    for key in resource_keys(catalog):
        cols += [f"reserve_cost:{key}", f"ondemand_cost:{key}", f"reserved:{key}"]
    return cols


def _record(solution_plan: AllocationPlan, instance: Instance) -> dict:
    costs = evaluate_plan(solution_plan, instance)
    row = {"stage1": costs.stage1, "stage2_expected": costs.stage2_expected, "total": costs.total}
    reserved = _reserved_units(solution_plan, instance.catalog)
    for key in resource_keys(instance.catalog):
        row[f"reserve_cost:{key}"] = costs.reservation_by_resource[key]
        row[f"ondemand_cost:{key}"] = costs.ondemand_by_resource[key]
        row[f"reserved:{key}"] = int(reserved[key] > 0)
    return row


def _reserved_units(plan: AllocationPlan, catalog: ResourceCatalog) -> dict[str, int]:
    out = {}
    for v, r in enumerate(catalog.cyber):
        out[f"cyber:{r.id}"] = int(plan.reserved_cyber[:, v].sum())
    for x, r in enumerate(catalog.physical):
        out[f"physical:{r.id}"] = int(plan.reserved_physical[:, x].sum())
    out["edge"] = int(plan.reserved_edge.sum())
    for y, r in enumerate(catalog.people):
        out[f"people:{r.id}"] = int(plan.reserved_people[:, y].sum())
    out["outsource"] = 0
    return out


def _solve(instance: Instance, config: SolverConfig | None, fix: tuple[Target, int] | None = None) -> AllocationPlan:
    problem, vmap = build_sip(instance.catalog, instance.scenarios, instance.quantum)
    if fix is not None:
        target, value = fix
        ids = target.ids(vmap)
        upper = float(problem.upper[ids].sum())
        if value > upper:
            raise ExperimentError(f"fixed value {value} for {target.label} exceeds its upper bound {upper:g}")
        problem = problem.with_constraints(
            [LinearConstraint(tuple((int(i), 1.0) for i in ids), Relation.EQ, float(value), f"fix[{target.label}]")]
        )
    result = solve_milp(problem, config)
    if result.status is not Status.OPTIMAL:
        raise SolveError(result.status, "sweep point not solved to optimality", vmap.diagnostics)
    return extract_plan(result, vmap)


# -- studies ----------------------------------------------------------------------------


def sweep_reservation(
    instance: Instance, target: str | Target, grid: Iterable[int], config: SolverConfig | None = None
) -> SweepSeries:
    """Pin the reserved amount of ``target`` (quanta, or servers for edge) at each grid value
    and re-optimise everything else."""
    target = parse_target(instance.catalog, target) if isinstance(target, str) else target
    grid = _check_grid(grid, "reservation")
    if any(g < 0 or int(g) != g for g in grid):
        raise ExperimentError("reservation grid values must be non-negative integers")
    series = SweepSeries("reserved", ["reserved", "stage1", "stage2_expected", "total"] + _resource_columns(instance.catalog))
    for value in grid:
        plan = _solve(instance, config, (target, int(value)))
        series.rows.append({"reserved": int(value), **_record(plan, instance)})
    return series


def _two_scenario(instance: Instance) -> None:
    if len(instance.scenarios) != 2:
        raise ExperimentError("probability studies need exactly two scenarios")


def sweep_probability(instance: Instance, grid: Iterable[float], config: SolverConfig | None = None) -> SweepSeries:
    """Solve the stochastic program for each probability of the first scenario."""
    _two_scenario(instance)
    grid = _check_grid(grid, "probability")
    for p in grid:
        if not 0.0 <= p <= 1.0:
            raise ExperimentError(f"probability {p} outside [0, 1]")
    series = SweepSeries("p_first", ["p_first", "stage1", "stage2_expected", "total"] + _resource_columns(instance.catalog))
    for p in grid:
        point = instance.with_probabilities((p, 1.0 - p))
        series.rows.append({"p_first": float(p), **_record(_solve(point, config), point)})
    return series


def probability_grid(step: float) -> list[float]:
    if not step > 0:
        raise ExperimentError(f"step must be > 0, got {step}")
    n = int(math.floor(1.0 / step + 1e-9))
    grid = [round(k * step, 12) for k in range(n + 1)]
    if grid[-1] < 1.0:
        grid.append(1.0)
    return grid


@dataclass
class ThresholdResult:
    target: str
    step: float
    threshold: float | None  # None: never reserved on the grid
    series: SweepSeries


def find_threshold(
    instance: Instance, target: str | Target, step: float = 0.01, config: SolverConfig | None = None
) -> ThresholdResult:
    """Smallest grid probability of the first scenario at which the optimum reserves ``target``.

    The scan walks the grid upward and stops at the first reserving point, so
    the last row of the returned series is the threshold row when one exists.
    """
    _two_scenario(instance)
    target = parse_target(instance.catalog, target) if isinstance(target, str) else target
    series = SweepSeries(
        "p_first",
        ["p_first", "stage1", "stage2_expected", "total", "reserved_units", "reserved"],
    )
    threshold = None
    for p in probability_grid(step):
        point = instance.with_probabilities((p, 1.0 - p))
        plan = _solve(point, config)
        units = target.reserved(plan)
        costs = evaluate_plan(plan, point)
        series.rows.append(
            {
                "p_first": p,
                "stage1": costs.stage1,
                "stage2_expected": costs.stage2_expected,
                "total": costs.total,
                "reserved_units": units,
                "reserved": int(units > 0),
            }
        )
        if units > 0:
            threshold = p
            break
    return ThresholdResult(target.label, step, threshold, series)


def compare_schemes(
    instance: Instance,
    multipliers: Iterable[float],
    seeds: Sequence[int] = tuple(range(20)),
    config: SolverConfig | None = None,
) -> SweepSeries:
    """Total cost of the stochastic program, the expected-value scheme and random
    schemes as every on-demand price is multiplied by each factor."""
    multipliers = _check_grid(multipliers, "multiplier")
    if any(m < 0 for m in multipliers):
        raise ExperimentError("on-demand multipliers must be >= 0")
    seeds = list(seeds)
    columns = ["multiplier", "stage1", "stage2_expected", "total", "evf_stage1", "evf_stage2_expected", "evf_total"]
    if seeds:
        columns += ["random_min", "random_mean", "random_max", "sip_dominates"]
    series = SweepSeries("multiplier", columns)
    for m in multipliers:
        point = instance.with_catalog(instance.catalog.scale_ondemand(m))
        sip = evaluate_plan(_solve(point, config), point)
        evf = evaluate_plan(build_evf(point, config), point)
        row = {
            "multiplier": float(m),
            "stage1": sip.stage1,
            "stage2_expected": sip.stage2_expected,
            "total": sip.total,
            "evf_stage1": evf.stage1,
            "evf_stage2_expected": evf.stage2_expected,
            "evf_total": evf.total,
        }
        if seeds:
            randoms = [evaluate_plan(build_random(point, s, config), point).total for s in seeds]
            row.update(
                random_min=min(randoms),
                random_mean=math.fsum(randoms) / len(randoms),
                random_max=max(randoms),
                sip_dominates=int(sip.total <= evf.total + 1e-6 and sip.total <= min(randoms) + 1e-6),
            )
            row["_random_totals"] = randoms
        series.rows.append(row)
    return series
