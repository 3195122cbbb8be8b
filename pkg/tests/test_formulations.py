import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochalloc.experiments import default_instance
from stochalloc.formulations import (
    RecourseInfeasibleError,
    SolveError,
    build_dip,
    build_evf,
    build_random,
    build_sip,
    census,
    extract_plan,
    solve_dip,
    solve_recourse,
    solve_sip,
)
from stochalloc.milp import SolveResult, SolveStats, Status, solve_milp
from stochalloc.model import (
    CyberResource,
    DemandScenario,
    EdgeServer,
    FirstStage,
    PeopleResource,
    PhysicalResource,
    ResourceCatalog,
    ScenarioSet,
    TimeQuantum,
    evaluate_plan,
    validate,
)

from instances import (
    demand_or_idle_closed_form,
    enumerate_single_user_sip,
    single_user_sip_instance,
)

CR_Z, CO_Z = 0.07625, 0.13875


def edge_only(servers=1, capacity=1.0):
    return ResourceCatalog(edge=tuple(EdgeServer(f"z{i + 1}", capacity, CR_Z, CO_Z) for i in range(servers)))


def data_scenario(gb):
    e = np.zeros((1, 0))
    return DemandScenario(e, e, e, e, [gb])


def single_server_instance(p):
    return validate(edge_only(), ScenarioSet((data_scenario(0.5), data_scenario(0.0)), (p, 1 - p)))


# -- deterministic program ------------------------------------------------------


def test_dip_zero_demand():
    cat = edge_only(2)
    inst = validate(cat, ScenarioSet((data_scenario(0.0),), (1.0,)))
    sol = solve_dip(inst)
    assert sol.objective == 0
    assert not sol.plan.reserved_edge.any()


def test_dip_one_server_of_two():
    inst = validate(edge_only(2), ScenarioSet((data_scenario(0.5),), (1.0,)))
    # four assignments by hand: cover needs at least one server
    costs = [CR_Z * (a + b) for a, b in itertools.product((0, 1), repeat=2) if a + b >= 1]
    sol = solve_dip(inst)
    assert sol.objective == pytest.approx(min(costs))
    assert sol.plan.reserved_edge.sum() == 1


def test_dip_teacher_equality():
    cat = ResourceCatalog(people=(PeopleResource("y1", 40.0, 25.0, 19.6),))
    e = np.zeros((1, 0))
    inst = validate(cat, ScenarioSet((DemandScenario(e, e, [[0.4]], [[1]], [0.0]),), (1.0,)))
    sol = solve_dip(inst)
    assert sol.objective == pytest.approx(4 * 0.1 * 25)
    assert sol.plan.reserved_people.tolist() == [[4]]


def test_dip_unavailable_teacher_is_diagnosed():
    cat = ResourceCatalog(people=(PeopleResource("y1", 40.0, 25.0, 19.6), PeopleResource("y2", 40.0, 25.0, 19.6)))
    e = np.zeros((1, 0))
    inst = validate(cat, ScenarioSet((DemandScenario(e, e, [[0.0, 0.4]], [[1, 0]], [0.0]),), (1.0,)))
    with pytest.raises(SolveError) as info:
        solve_dip(inst)
    assert info.value.status is Status.INFEASIBLE
    assert any("user 0" in d and "'y2'" in d for d in info.value.diagnostics)


# -- stochastic program ---------------------------------------------------------------


def test_sip_reserves_at_p_06():
    sol = solve_sip(single_server_instance(0.6))
    assert sol.objective == pytest.approx(CR_Z)
    assert sol.plan.reserved_edge.tolist() == [[1]]
    assert not sol.plan.ondemand_edge.any()


def test_sip_rents_at_p_05():
    sol = solve_sip(single_server_instance(0.5))
    assert sol.objective == pytest.approx(0.5 * CO_Z)
    assert sol.objective == pytest.approx(0.069375)
    assert sol.plan.reserved_edge.tolist() == [[0]]


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.0))
def test_sip_switches_at_cost_ratio(p):
    if abs(p * CO_Z - CR_Z) < 1e-6:
        return  # tie: either decision is optimal
    sol = solve_sip(single_server_instance(p))
    assert bool(sol.plan.reserved_edge[0, 0]) == (p * CO_Z > CR_Z)
    assert sol.objective == pytest.approx(min(CR_Z, p * CO_Z))


@pytest.mark.parametrize("shape", [(1, 1, 1, 1, 1, 1), (2, 3, 1, 4, 2, 2), (3, 0, 2, 1, 0, 3), (10, 3, 1, 20, 4, 2)])
def test_census_matches_generated_program(shape):
    W, V, X, Z, Y, S = shape
    cat = ResourceCatalog(
        cyber=tuple(CyberResource(f"v{i}", 1, 2) for i in range(V)),
        physical=tuple(PhysicalResource(f"x{i}", 1, 2) for i in range(X)),
        edge=tuple(EdgeServer(f"z{i}", 1, 1, 2) for i in range(Z)),
        people=tuple(PeopleResource(f"y{i}", 8, 1, 2) for i in range(Y)),
    )
    scen = tuple(DemandScenario.zeros(W, cat) for _ in range(S))
    problem, vmap = build_sip(cat, ScenarioSet(scen, (1 / S,) * S))
    assert (problem.num_variables, problem.num_constraints) == census(W, V, X, Z, Y, S)
    assert len(vmap) == problem.num_variables
    problem, vmap = build_dip(cat, scen[0])
    assert (problem.num_variables, problem.num_constraints) == census(W, V, X, Z, Y, 1, "dip")


def test_index_map_is_a_bijection():
    inst = default_instance()
    problem, vmap = build_sip(inst.catalog, inst.scenarios, inst.quantum)
    seen = set()
    for family, arr in vmap.families.items():
        for idx in np.ndindex(arr.shape):
            vid = int(arr[idx])
            assert vmap.locate(vid) == (family, idx)
            seen.add(vid)
    assert seen == set(range(problem.num_variables))


def test_extract_rejects_non_optimal():
    _, vmap = build_sip(edge_only(), ScenarioSet((data_scenario(0.5),), (1.0,)))
    with pytest.raises(SolveError, match="infeasible"):
        extract_plan(SolveResult(Status.INFEASIBLE, None, None, SolveStats()), vmap)


def test_extract_all_zero():
    inst = validate(edge_only(2), ScenarioSet((data_scenario(0.0), data_scenario(0.0)), (0.5, 0.5)))
    problem, vmap = build_sip(inst.catalog, inst.scenarios)
    zero = SolveResult(Status.OPTIMAL, np.zeros(problem.num_variables), 0.0, SolveStats())
    plan = extract_plan(zero, vmap)
    assert evaluate_plan(plan, inst).total == 0


@pytest.mark.parametrize("seed", range(20))
def test_extract_round_trip(seed):
    inst = single_user_sip_instance(np.random.default_rng(1000 + seed))
    sol = solve_sip(inst)
    assert evaluate_plan(sol.plan, inst).total == pytest.approx(sol.objective, abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sip_matches_exhaustive_search(seed):
    inst = single_user_sip_instance(np.random.default_rng(seed))
    assert solve_sip(inst).objective == pytest.approx(enumerate_single_user_sip(inst), abs=1e-6)


@pytest.mark.parametrize("p", [0.0, 0.3, 0.55, 0.6, 0.9, 1.0])
def test_sip_matches_closed_form_on_default_instance(p):
    inst = default_instance(p)
    assert solve_sip(inst).objective == pytest.approx(demand_or_idle_closed_form(inst), abs=1e-6)


def test_sip_objective_monotone_in_probability():
    values = [solve_sip(default_instance(p)).objective for p in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)]
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))


# -- recourse ------------------------------------------------------------------------------


def cyber_teacher_catalog():
    return ResourceCatalog(
        cyber=(CyberResource("w", 0.017, 0.035),),
        edge=(EdgeServer("z1", 1.0, CR_Z, CO_Z), EdgeServer("z2", 0.5, 0.05, 0.06), EdgeServer("z3", 0.5, 0.05, 0.09)),
        people=(PeopleResource("y1", 40.0, 25.0, 19.6),),
    )


def test_recourse_zero_when_reserved_covers():
    cat = cyber_teacher_catalog()
    s = DemandScenario([[0.5]], np.zeros((1, 0)), [[0.4]], [[1]], [1.0])
    first = FirstStage([[5]], np.zeros((1, 0)), [[1, 0, 0]], [[4]])
    assert solve_recourse(first, cat, s).cost == 0


def test_recourse_cyber_shortfall():
    cat = cyber_teacher_catalog()
    s = DemandScenario([[0.5]], np.zeros((1, 0)), [[0.0]], [[1]], [0.0])
    rec = solve_recourse(FirstStage([[2]], np.zeros((1, 0)), [[0, 0, 0]], [[0]]), cat, s)
    assert rec.cyber.tolist() == [[3]]
    assert rec.cost == pytest.approx(3 * 0.1 * 0.035)


def test_recourse_outsources_unavailable_teacher():
    cat = cyber_teacher_catalog()
    s = DemandScenario([[0.0]], np.zeros((1, 0)), [[0.4]], [[0]], [0.0])
    rec = solve_recourse(FirstStage([[0]], np.zeros((1, 0)), [[0, 0, 0]], [[4]]), cat, s)
    assert rec.outsourced.tolist() == [4]
    assert rec.cost == pytest.approx(4 * 0.1 * 19.6)


def test_recourse_picks_cheapest_server_cover():
    cat = cyber_teacher_catalog()
    s = DemandScenario([[0.0]], np.zeros((1, 0)), [[0.0]], [[1]], [1.0])
    rec = solve_recourse(FirstStage([[0]], np.zeros((1, 0)), [[0, 0, 0]], [[0]]), cat, s)
    # options: z1 alone 0.13875, z2+z3 0.15
    assert rec.edge.tolist() == [[1, 0, 0]]
    s = DemandScenario([[0.0]], np.zeros((1, 0)), [[0.0]], [[1]], [0.5])
    rec = solve_recourse(FirstStage([[0]], np.zeros((1, 0)), [[0, 0, 0]], [[0]]), cat, s)
    assert rec.edge.tolist() == [[0, 1, 0]]


def test_recourse_infeasible_when_capacity_short():
    cat = cyber_teacher_catalog()
    s = DemandScenario([[0.0]], np.zeros((1, 0)), [[0.0]], [[1]], [3.0])
    with pytest.raises(RecourseInfeasibleError):
        solve_recourse(FirstStage([[0]], np.zeros((1, 0)), [[0, 0, 0]], [[0]]), cat, s)


@pytest.mark.parametrize("seed", range(10))
def test_recourse_is_minimal_against_enumeration(seed):
    rng = np.random.default_rng(seed)
    inst = single_user_sip_instance(rng)
    cat = inst.catalog
    Z, Y = len(cat.edge), len(cat.people)
    first = FirstStage(
        rng.integers(0, 4, size=(1, 1)), rng.integers(0, 4, size=(1, 1)),
        (rng.random((1, Z)) < 0.4).astype(int), rng.integers(0, 4, size=(1, Y)),
    )
    for s in inst.scenarios.scenarios:
        rec = solve_recourse(first, cat, s, inst.quantum)
        # enumerate every on-demand choice on the grid and keep the cheapest feasible one
        best = np.inf
        d = s.units(inst.quantum)
        for co, po, out in itertools.product(range(4), range(4), range(4)):
            if first.cyber[0, 0] + co < d.cyber[0, 0] or first.physical[0, 0] + po < d.physical[0, 0]:
                continue
            if any(d.availability[0, y] * first.people[0, y] + out < d.people[0, y] for y in range(Y)):
                continue
            base = 0.1 * (co * cat.cyber[0].ondemand_cost + po * cat.physical[0].ondemand_cost + out * cat.outsource_rate)
            for pick in itertools.product((0, 1), repeat=Z):
                if any(pick[z] and first.edge[0, z] for z in range(Z)):
                    continue
                stored = sum(cat.edge[z].capacity_gb for z in range(Z) if pick[z] or first.edge[0, z])
                if stored >= s.data_gb[0] - 1e-9:
                    best = min(best, base + sum(cat.edge[z].ondemand_cost for z in range(Z) if pick[z]))
        assert rec.cost == pytest.approx(best, abs=1e-9)


# -- baselines ------------------------------------------------------------------------------


def test_evf_reserves_average_and_buys_shortfall():
    cat = ResourceCatalog(cyber=(CyberResource("v", 1.0, 2.0),))
    e = np.zeros((1, 0))
    inst = validate(cat, ScenarioSet((DemandScenario([[1.0]], e, e, e, [0.0]), DemandScenario([[0.0]], e, e, e, [0.0])), (0.5, 0.5)))
    plan = build_evf(inst)
    assert plan.reserved_cyber.tolist() == [[5]]
    assert plan.ondemand_cyber[:, 0, 0].tolist() == [5, 0]


def test_evf_picks_large_servers_first():
    cat = ResourceCatalog(edge=(EdgeServer("a", 0.5, 1, 2), EdgeServer("b", 1.0, 1, 2), EdgeServer("c", 1.0, 1, 2)))
    inst = validate(cat, ScenarioSet((data_scenario(1.5),), (1.0,)))
    assert build_evf(inst).reserved_edge.tolist() == [[0, 1, 1]]


def test_evf_equals_sip_without_uncertainty():
    cat = ResourceCatalog(
        cyber=(CyberResource("w", 0.017, 0.035), CyberResource("s", 0.005, 0.009)),
        physical=(PhysicalResource("c", 3.5, 4.0),),
        edge=tuple(EdgeServer(f"z{i}", 1.0, CR_Z, CO_Z) for i in range(6)),
        people=(PeopleResource("y1", 40.0, 15.0, 19.6), PeopleResource("y2", 40.0, 15.0, 19.6)),
        outsource_rate=19.6,
    )
    s = DemandScenario(
        [[0.3, 0.2], [0.1, 0.0], [0.5, 0.4]], [[0.3], [0.0], [0.2]], [[0.4, 0.0], [0.0, 0.3], [0.2, 0.0]],
        np.ones((3, 2), dtype=int), [0.5, 1.5, 0.0],
    )
    inst = validate(cat, ScenarioSet((s, s), (0.6, 0.4)))
    evf = evaluate_plan(build_evf(inst), inst).total
    assert evf == pytest.approx(solve_sip(inst).objective, abs=1e-6)


@pytest.mark.parametrize("p", [0.3, 0.6])
def test_evf_never_beats_sip(p):
    inst = default_instance(p)
    assert evaluate_plan(build_evf(inst), inst).total >= solve_sip(inst).objective - 1e-6


def test_random_is_deterministic_per_seed():
    inst = default_instance()
    a, b = build_random(inst, 11), build_random(inst, 11)
    assert a.to_dict() == b.to_dict()
    assert build_random(inst, 12).to_dict() != a.to_dict()


def test_random_zero_demand_costs_nothing():
    inst = validate(edge_only(3), ScenarioSet((data_scenario(0.0),), (1.0,)))
    total = evaluate_plan(build_random(inst, 0), inst).total
    assert total >= 0 == solve_sip(inst).objective


def test_random_never_beats_sip():
    inst = default_instance()
    sip = solve_sip(inst).objective
    totals = [evaluate_plan(build_random(inst, seed), inst).total for seed in range(100)]
    assert min(totals) >= sip - 1e-6


def test_random_plan_respects_server_uniqueness():
    inst = default_instance()
    for seed in range(5):
        plan = build_random(inst, seed)
        assert plan.reserved_edge.sum(axis=0).max() <= 1
        assert np.all(plan.reserved_edge + plan.ondemand_edge[0] <= 1)


def test_quantum_changes_units_not_costs():
    inst = single_server_instance(0.6)
    coarse = validate(inst.catalog, inst.scenarios, TimeQuantum(0.5))
    assert solve_sip(coarse).objective == pytest.approx(solve_sip(inst).objective)
    assert solve_milp(build_sip(inst.catalog, inst.scenarios)[0]).is_optimal
