"""Resource catalog, demand scenarios, allocation plans and cost accounting.

Durations are stored in hours on the demand side and as integer counts of a
:class:`TimeQuantum` on the plan side.  Shared data volumes stay in GB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

PROBABILITY_TOL = 1e-9
_QUANTIZE_SLACK = 1e-9
_COVER_TOL = 1e-9


class ValidationError(ValueError):
    """Input data violates a documented invariant."""


class InfeasiblePlanError(ValueError):
    """An allocation plan leaves some demand uncovered or breaks a plan invariant."""


def _frozen(arr, dtype=float) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


# -- resources ---------------------------------------------------------------


@dataclass(frozen=True)
class CyberResource:
    id: str
    reserve_cost: float
    ondemand_cost: float


@dataclass(frozen=True)
class PhysicalResource:
    id: str
    reserve_cost: float
    ondemand_cost: float


@dataclass(frozen=True)
class EdgeServer:
    id: str
    capacity_gb: float
    reserve_cost: float  # $ per use
    ondemand_cost: float


@dataclass(frozen=True)
class PeopleResource:
    id: str
    capacity_hours: float
    reserve_cost: float
    ondemand_cost: float


@dataclass(frozen=True)
class ResourceCatalog:
    cyber: tuple[CyberResource, ...] = ()
    physical: tuple[PhysicalResource, ...] = ()
    edge: tuple[EdgeServer, ...] = ()
    people: tuple[PeopleResource, ...] = ()
    outsource_rate: float = 19.6  # $/hr for outsourced people hours

    def __post_init__(self):
        for name in ("cyber", "physical", "edge", "people"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def shape(self) -> tuple[int, int, int, int]:
        """(V, X, Z, Y)."""
        return len(self.cyber), len(self.physical), len(self.edge), len(self.people)

    def scale_ondemand(self, factor: float) -> "ResourceCatalog":
        """Every on-demand price (outsourcing included) multiplied by ``factor``."""
        return ResourceCatalog(
            cyber=tuple(replace(r, ondemand_cost=r.ondemand_cost * factor) for r in self.cyber),
            physical=tuple(replace(r, ondemand_cost=r.ondemand_cost * factor) for r in self.physical),
            edge=tuple(replace(r, ondemand_cost=r.ondemand_cost * factor) for r in self.edge),
            people=tuple(replace(r, ondemand_cost=r.ondemand_cost * factor) for r in self.people),
            outsource_rate=self.outsource_rate * factor,
        )

    def scale_costs(self, factor: float) -> "ResourceCatalog":
        scaled = self.scale_ondemand(factor)
        return ResourceCatalog(
            cyber=tuple(replace(r, reserve_cost=r.reserve_cost * factor) for r in scaled.cyber),
            physical=tuple(replace(r, reserve_cost=r.reserve_cost * factor) for r in scaled.physical),
            edge=tuple(replace(r, reserve_cost=r.reserve_cost * factor) for r in scaled.edge),
            people=tuple(replace(r, reserve_cost=r.reserve_cost * factor) for r in scaled.people),
            outsource_rate=scaled.outsource_rate,
        )

    def check(self) -> None:
        for family in ("cyber", "physical", "edge", "people"):
            ids = [r.id for r in getattr(self, family)]
            if len(set(ids)) != len(ids):
                raise ValidationError(f"duplicate {family} resource id")
            for r in getattr(self, family):
                for attr in ("reserve_cost", "ondemand_cost"):
                    value = getattr(r, attr)
                    if not (value >= 0 and math.isfinite(value)):
                        raise ValidationError(f"{family}[{r.id}].{attr} must be a finite value >= 0, got {value}")
        for r in self.edge:
            if not r.capacity_gb > 0:
                raise ValidationError(f"edge[{r.id}].capacity_gb must be > 0, got {r.capacity_gb}")
        for r in self.people:
            if not r.capacity_hours > 0:
                raise ValidationError(f"people[{r.id}].capacity_hours must be > 0, got {r.capacity_hours}")
        if not (self.outsource_rate >= 0 and math.isfinite(self.outsource_rate)):
            raise ValidationError(f"outsource_rate must be >= 0, got {self.outsource_rate}")


# -- demand ------------------------------------------------------------------


@dataclass(frozen=True)
class TimeQuantum:
    hours: float = 0.1

    def __post_init__(self):
        if not (self.hours > 0 and math.isfinite(self.hours)):
            raise ValidationError(f"time quantum must be > 0, got {self.hours}")


def quantize(hours: float, quantum: TimeQuantum | float = TimeQuantum()) -> int:
    """Smallest number of quanta covering ``hours`` (ceiling, never under-provisions)."""
    q = quantum.hours if isinstance(quantum, TimeQuantum) else float(quantum)
    if hours < 0 or math.isnan(hours):
        raise ValidationError(f"cannot quantize negative duration {hours}")
    # the slack absorbs binary representation error, e.g. 0.3 / 0.1 = 2.9999999999999996
    return max(0, math.ceil(hours / q - _QUANTIZE_SLACK))


def _quantize_array(hours: np.ndarray, q: float) -> np.ndarray:
    return np.maximum(np.ceil(hours / q - _QUANTIZE_SLACK), 0).astype(np.int64)


@dataclass(frozen=True)
class UnitDemand:
    """A demand realisation with every duration expressed in integer quanta."""

    cyber: np.ndarray  # (W, V)
    physical: np.ndarray  # (W, X)
    people: np.ndarray  # (W, Y)
    availability: np.ndarray  # (W, Y) in {0, 1}
    data_gb: np.ndarray  # (W,)


@dataclass(frozen=True, eq=False)
class DemandScenario:
    """One joint realisation of every user's demand.

    Arrays are indexed ``[user, resource]``; durations in hours, data in GB.
    """

    cyber_hours: np.ndarray
    physical_hours: np.ndarray
    people_hours: np.ndarray
    availability: np.ndarray
    data_gb: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cyber_hours", _frozen(self.cyber_hours))
        object.__setattr__(self, "physical_hours", _frozen(self.physical_hours))
        object.__setattr__(self, "people_hours", _frozen(self.people_hours))
        object.__setattr__(self, "availability", _frozen(self.availability, np.int64))
        object.__setattr__(self, "data_gb", _frozen(self.data_gb))

    @property
    def num_users(self) -> int:
        return len(self.data_gb)

    @classmethod
    def zeros(cls, users: int, catalog: ResourceCatalog, availability: int = 0) -> "DemandScenario":
        V, X, _, Y = catalog.shape
        return cls(
            np.zeros((users, V)),
            np.zeros((users, X)),
            np.zeros((users, Y)),
            np.full((users, Y), availability),
            np.zeros(users),
        )

    def units(self, quantum: TimeQuantum) -> UnitDemand:
        q = quantum.hours
        return UnitDemand(
            _quantize_array(self.cyber_hours, q),
            _quantize_array(self.physical_hours, q),
            _quantize_array(self.people_hours, q),
            np.asarray(self.availability, dtype=np.int64),
            np.asarray(self.data_gb, dtype=float),
        )

    def same_as(self, other: "DemandScenario") -> bool:
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("cyber_hours", "physical_hours", "people_hours", "availability", "data_gb")
        )

    def check(self, catalog: ResourceCatalog, label: str = "scenario") -> None:
        V, X, _, Y = catalog.shape
        W = self.num_users
        expected = {
            "cyber_hours": (W, V),
            "physical_hours": (W, X),
            "people_hours": (W, Y),
            "availability": (W, Y),
            "data_gb": (W,),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValidationError(f"{label}.{name} has shape {arr.shape}, expected {shape}")
            if np.any(~np.isfinite(arr)) or np.any(arr < 0):
                raise ValidationError(f"{label}.{name} must contain finite values >= 0")
        if np.any((self.availability != 0) & (self.availability != 1)):
            raise ValidationError(f"{label}.availability must be 0 or 1")


class DeterministicDemand(DemandScenario):
    """Demand assumed known in advance (the deterministic program's input)."""


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    scenarios: tuple[DemandScenario, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "probabilities", tuple(float(p) for p in self.probabilities))

    def __len__(self) -> int:
        return len(self.scenarios)

    @property
    def num_users(self) -> int:
        return self.scenarios[0].num_users

    def with_probabilities(self, probabilities: Sequence[float]) -> "ScenarioSet":
        return ScenarioSet(self.scenarios, tuple(probabilities))

    def check(self, catalog: ResourceCatalog) -> None:
        if len(self.scenarios) == 0:
            raise ValidationError("scenario set is empty")
        if len(self.scenarios) != len(self.probabilities):
            raise ValidationError(
                f"{len(self.scenarios)} scenarios but {len(self.probabilities)} probabilities"
            )
        for i, p in enumerate(self.probabilities):
            if not (p >= 0 and math.isfinite(p)):
                raise ValidationError(f"probability of scenario {i} must be >= 0, got {p}")
        total = math.fsum(self.probabilities)
        if abs(total - 1.0) > PROBABILITY_TOL:
            raise ValidationError(f"scenario probabilities must sum to 1 (sum={total:.12g})")
        users = self.scenarios[0].num_users
        for i, s in enumerate(self.scenarios):
            if s.num_users != users:
                raise ValidationError(f"scenario {i} has {s.num_users} users, scenario 0 has {users}")
            s.check(catalog, label=f"scenario[{i}]")


@dataclass(frozen=True, eq=False)
class Instance:
    """A validated catalog plus scenario set plus time quantum."""

    catalog: ResourceCatalog
    scenarios: ScenarioSet
    quantum: TimeQuantum = field(default_factory=TimeQuantum)

    @property
    def num_users(self) -> int:
        return self.scenarios.num_users

    def with_catalog(self, catalog: ResourceCatalog) -> "Instance":
        return validate(catalog, self.scenarios, self.quantum)

    def with_scenarios(self, scenarios: ScenarioSet) -> "Instance":
        return validate(self.catalog, scenarios, self.quantum)

    def with_probabilities(self, probabilities: Sequence[float]) -> "Instance":
        return self.with_scenarios(self.scenarios.with_probabilities(probabilities))


def validate(
    catalog: ResourceCatalog, scenarios: ScenarioSet, quantum: TimeQuantum | None = None
) -> Instance:
    catalog.check()
    scenarios.check(catalog)
    return Instance(catalog, scenarios, quantum or TimeQuantum())


def expected_demand(scenarios: ScenarioSet) -> DeterministicDemand:
    """Probability-weighted mean demand.

    Availability is averaged too and then thresholded: a people resource counts
    as available when it is available with probability at least one half.
    """
    p = np.asarray(scenarios.probabilities)

    def mean(name: str) -> np.ndarray:
        stacked = np.stack([getattr(s, name) for s in scenarios.scenarios])
        return np.tensordot(p, stacked, axes=1)

    avail = mean("availability")
    return DeterministicDemand(
        mean("cyber_hours"),
        mean("physical_hours"),
        mean("people_hours"),
        (avail >= 0.5 - PROBABILITY_TOL).astype(np.int64),
        mean("data_gb"),
    )


# -- plans and costs -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AllocationPlan:
    """First-stage reservations and per-scenario on-demand purchases, in quanta.

    ``edge_*`` arrays are 0/1 server assignments.  Second-stage arrays carry a
    leading scenario axis.
    """

    reserved_cyber: np.ndarray  # (W, V)
    reserved_physical: np.ndarray  # (W, X)
    reserved_edge: np.ndarray  # (W, Z)
    reserved_people: np.ndarray  # (W, Y)
    ondemand_cyber: np.ndarray  # (S, W, V)
    ondemand_physical: np.ndarray  # (S, W, X)
    ondemand_edge: np.ndarray  # (S, W, Z)
    outsourced_people: np.ndarray  # (S, W)

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            object.__setattr__(self, name, _frozen(getattr(self, name), np.int64))

    @property
    def first_stage(self) -> "FirstStage":
        return FirstStage(self.reserved_cyber, self.reserved_physical, self.reserved_edge, self.reserved_people)

    @classmethod
    def from_stages(cls, first: "FirstStage", recourse: Sequence["Recourse"]) -> "AllocationPlan":
        return cls(
            first.cyber,
            first.physical,
            first.edge,
            first.people,
            np.stack([r.cyber for r in recourse]),
            np.stack([r.physical for r in recourse]),
            np.stack([r.edge for r in recourse]),
            np.stack([r.outsourced for r in recourse]),
        )

    def to_dict(self) -> dict:
        return {name: getattr(self, name).tolist() for name in self.__dataclass_fields__}


@dataclass(frozen=True, eq=False)
class FirstStage:
    cyber: np.ndarray
    physical: np.ndarray
    edge: np.ndarray
    people: np.ndarray

    def __post_init__(self):
        for name in ("cyber", "physical", "edge", "people"):
            object.__setattr__(self, name, _frozen(getattr(self, name), np.int64))


@dataclass(frozen=True, eq=False)
class Recourse:
    """Second-stage purchases for one scenario, with their cost."""

    cyber: np.ndarray
    physical: np.ndarray
    edge: np.ndarray
    outsourced: np.ndarray
    cost: float


@dataclass(frozen=True)
class CostBreakdown:
    stage1: float
    stage2_expected: float
    stage2_by_scenario: tuple[float, ...]
    reservation_by_resource: dict = field(default_factory=dict, compare=False)
    ondemand_by_resource: dict = field(default_factory=dict, compare=False)

    @property
    def total(self) -> float:
        return self.stage1 + self.stage2_expected

    def to_dict(self) -> dict:
        return {
            "stage1": self.stage1,
            "stage2_expected": self.stage2_expected,
            "stage2_by_scenario": list(self.stage2_by_scenario),
            "total": self.total,
        }


def resource_keys(catalog: ResourceCatalog) -> list[str]:
    """Stable column keys used for per-resource reporting."""
    return (
        [f"cyber:{r.id}" for r in catalog.cyber]
        + [f"physical:{r.id}" for r in catalog.physical]
        + ["edge"]
        + [f"people:{r.id}" for r in catalog.people]
        + ["outsource"]
    )


def first_stage_costs(first: FirstStage, catalog: ResourceCatalog, quantum: TimeQuantum) -> dict[str, float]:
    q = quantum.hours
    out: dict[str, float] = {}
    for v, r in enumerate(catalog.cyber):
        out[f"cyber:{r.id}"] = float(first.cyber[:, v].sum()) * q * r.reserve_cost
    for x, r in enumerate(catalog.physical):
        out[f"physical:{r.id}"] = float(first.physical[:, x].sum()) * q * r.reserve_cost
    out["edge"] = float(first.edge.sum(axis=0) @ np.array([r.reserve_cost for r in catalog.edge])) if catalog.edge else 0.0
    for y, r in enumerate(catalog.people):
        out[f"people:{r.id}"] = float(first.people[:, y].sum()) * q * r.reserve_cost
    out["outsource"] = 0.0
    return out


def recourse_costs(
    cyber: np.ndarray,
    physical: np.ndarray,
    edge: np.ndarray,
    outsourced: np.ndarray,
    catalog: ResourceCatalog,
    quantum: TimeQuantum,
) -> dict[str, float]:
    q = quantum.hours
    out: dict[str, float] = {}
    for v, r in enumerate(catalog.cyber):
        out[f"cyber:{r.id}"] = float(cyber[:, v].sum()) * q * r.ondemand_cost
    for x, r in enumerate(catalog.physical):
        out[f"physical:{r.id}"] = float(physical[:, x].sum()) * q * r.ondemand_cost
    out["edge"] = float(edge.sum(axis=0) @ np.array([r.ondemand_cost for r in catalog.edge])) if catalog.edge else 0.0
    for r in catalog.people:
        out[f"people:{r.id}"] = 0.0
    out["outsource"] = float(outsourced.sum()) * q * catalog.outsource_rate
    return out


def check_first_stage(first: FirstStage, catalog: ResourceCatalog, quantum: TimeQuantum) -> None:
    """Reservation-side invariants: server uniqueness and people capacity."""
    for name in ("cyber", "physical", "edge", "people"):
        if np.any(getattr(first, name) < 0):
            raise InfeasiblePlanError(f"negative reserved {name} quantity")
    if np.any(first.edge > 1):
        raise InfeasiblePlanError("reserved edge assignments must be 0/1")
    for z, r in enumerate(catalog.edge):
        if first.edge[:, z].sum() > 1:
            raise InfeasiblePlanError(f"edge server uniqueness violated for reservation (z={r.id!r})")
    for y, r in enumerate(catalog.people):
        cap = math.floor(r.capacity_hours / quantum.hours + _QUANTIZE_SLACK)
        if first.people[:, y].sum() > cap:
            raise InfeasiblePlanError(f"people capacity exceeded (y={r.id!r}): {first.people[:, y].sum()} > {cap} units")


def check_recourse(
    first: FirstStage,
    cyber: np.ndarray,
    physical: np.ndarray,
    edge: np.ndarray,
    outsourced: np.ndarray,
    catalog: ResourceCatalog,
    demand: UnitDemand,
    label: str,
) -> None:
    """Raise :class:`InfeasiblePlanError` naming the first violated coverage rule."""
    for name, arr in (("cyber", cyber), ("physical", physical), ("edge", edge), ("outsourced", outsourced)):
        if np.any(arr < 0):
            raise InfeasiblePlanError(f"negative on-demand {name} quantity in {label}")
    short = np.argwhere(first.cyber + cyber < demand.cyber)
    if len(short):
        w, v = short[0]
        raise InfeasiblePlanError(f"cyber coverage violated (w={w}, v={catalog.cyber[v].id!r}, {label})")
    short = np.argwhere(first.physical + physical < demand.physical)
    if len(short):
        w, x = short[0]
        raise InfeasiblePlanError(f"physical coverage violated (w={w}, x={catalog.physical[x].id!r}, {label})")
    short = np.argwhere(demand.availability * first.people + outsourced[:, None] < demand.people)
    if len(short):
        w, y = short[0]
        raise InfeasiblePlanError(f"people coverage violated (w={w}, y={catalog.people[y].id!r}, {label})")
    if np.any(edge > 1):
        raise InfeasiblePlanError(f"on-demand edge assignments must be 0/1 in {label}")
    for z, r in enumerate(catalog.edge):
        if edge[:, z].sum() > 1:
            raise InfeasiblePlanError(f"edge server uniqueness violated on demand (z={r.id!r}, {label})")
    both = np.argwhere(first.edge + edge > 1)
    if len(both):
        w, z = both[0]
        raise InfeasiblePlanError(f"server subscribed under both plans (w={w}, z={catalog.edge[z].id!r}, {label})")
    cap = np.array([r.capacity_gb for r in catalog.edge])
    stored = (first.edge + edge) @ cap if len(cap) else np.zeros(len(demand.data_gb))
    short = np.flatnonzero(stored < demand.data_gb - _COVER_TOL)
    if len(short):
        raise InfeasiblePlanError(f"edge data coverage violated (w={short[0]}, {label})")


def evaluate_plan(plan: AllocationPlan, instance: Instance) -> CostBreakdown:
    """Price ``plan`` against ``instance`` after checking it covers every scenario."""
    catalog, scenarios, quantum = instance.catalog, instance.scenarios, instance.quantum
    if plan.ondemand_cyber.shape[0] != len(scenarios):
        raise InfeasiblePlanError(
            f"plan has {plan.ondemand_cyber.shape[0]} scenarios, instance has {len(scenarios)}"
        )
    first = plan.first_stage
    check_first_stage(first, catalog, quantum)
    reserve = first_stage_costs(first, catalog, quantum)
    stage1 = math.fsum(reserve.values())

    per_scenario = []
    expected_by_resource = {k: 0.0 for k in reserve}
    for i, (scenario, p) in enumerate(zip(scenarios.scenarios, scenarios.probabilities)):
        args = (plan.ondemand_cyber[i], plan.ondemand_physical[i], plan.ondemand_edge[i], plan.outsourced_people[i])
        check_recourse(first, *args, catalog, scenario.units(quantum), label=f"scenario {i}")
        costs = recourse_costs(*args, catalog, quantum)
        per_scenario.append(math.fsum(costs.values()))
        for k, value in costs.items():
            expected_by_resource[k] += p * value
    stage2 = math.fsum(p * c for p, c in zip(scenarios.probabilities, per_scenario))
    return CostBreakdown(stage1, stage2, tuple(per_scenario), reserve, expected_by_resource)
