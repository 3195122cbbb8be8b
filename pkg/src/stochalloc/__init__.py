"""Reservation versus on-demand resource subscription under uncertain demand."""

from .formulations import (
    build_dip,
    build_evf,
    build_random,
    build_sip,
    extract_plan,
    solve_dip,
    solve_recourse,
    solve_sip,
)
from .model import (
    AllocationPlan,
    CostBreakdown,
    DemandScenario,
    DeterministicDemand,
    Instance,
    ResourceCatalog,
    ScenarioSet,
    TimeQuantum,
    evaluate_plan,
    expected_demand,
    quantize,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationPlan",
    "CostBreakdown",
    "DemandScenario",
    "DeterministicDemand",
    "Instance",
    "ResourceCatalog",
    "ScenarioSet",
    "TimeQuantum",
    "build_dip",
    "build_evf",
    "build_random",
    "build_sip",
    "evaluate_plan",
    "expected_demand",
    "extract_plan",
    "quantize",
    "solve_dip",
    "solve_recourse",
    "solve_sip",
    "validate",
]
