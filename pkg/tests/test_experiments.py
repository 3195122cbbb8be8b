import math

import numpy as np
import pytest

from stochalloc.experiments import (
    ExperimentError,
    compare_schemes,
    default_catalog,
    default_instance,
    find_threshold,
    parse_target,
    probability_grid,
    small_instance,
    sweep_probability,
    sweep_reservation,
)
from stochalloc.formulations import solve_sip
from stochalloc.model import ScenarioSet


def test_default_catalog_prices():
    cat = default_catalog()
    assert [(r.id, r.reserve_cost, r.ondemand_cost) for r in cat.cyber] == [
        ("w", 0.017, 0.035), ("s", 0.005, 0.009), ("l", 0.010, 0.014)
    ]
    assert (cat.physical[0].reserve_cost, cat.physical[0].ondemand_cost) == (3.5, 4.0)
    assert len(cat.edge) == 20
    assert {(r.reserve_cost, r.ondemand_cost) for r in cat.edge} == {(0.07625, 0.13875)}
    assert {(r.reserve_cost, r.ondemand_cost, r.capacity_hours) for r in cat.people} == {(25.0, 19.6, 40.0)}
    assert cat.outsource_rate == 19.6


def test_parse_target():
    cat = default_catalog()
    assert parse_target(cat, "edge").index is None
    assert parse_target(cat, "physical:c").index == 0
    assert parse_target(cat, "cyber:l").index == 2
    with pytest.raises(ExperimentError, match="known ids"):
        parse_target(cat, "cyber:q")
    with pytest.raises(ExperimentError):
        parse_target(cat, "network")
    with pytest.raises(ExperimentError):
        parse_target(cat, "people")


@pytest.mark.parametrize("target,grid", [("cyber:w", range(0, 12)), ("physical:c", range(0, 10)), ("edge", range(0, 4))])
def test_sweep_reservation_shapes(target, grid):
    inst = small_instance()
    series = sweep_reservation(inst, target, grid)
    assert len(series.rows) == len(grid)
    key = target if target != "edge" else "edge"
    stage1 = np.array(series.column(f"reserve_cost:{key}"))
    stage2 = np.array(series.column(f"ondemand_cost:{key}"))
    # reservation spend grows by the same amount per step
    steps = np.diff(stage1)
    assert np.all(steps > 0)
    assert np.allclose(steps, steps[0])
    assert np.all(np.diff(stage2) <= 1e-9)
    assert stage1[0] == 0
    best = solve_sip(inst).objective
    assert min(series.column("total")) == pytest.approx(best, abs=1e-6)


def test_sweep_reservation_beyond_demand():
    inst = small_instance()
    series = sweep_reservation(inst, "cyber:w", range(5, 12))
    assert all(v == 0 for v in series.column("ondemand_cost:cyber:w"))
    assert np.all(np.diff(series.column("total")) > 0)


def test_sweep_reservation_errors():
    inst = small_instance()
    with pytest.raises(ExperimentError, match="upper bound"):
        sweep_reservation(inst, "edge", [0, 4])
    with pytest.raises(ExperimentError, match="increasing"):
        sweep_reservation(inst, "edge", [1, 0])
    with pytest.raises(ExperimentError, match="empty"):
        sweep_reservation(inst, "edge", [])


def test_probability_sweep_examples():
    inst = default_instance()
    series = sweep_probability(inst, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert len(series.rows) == 5
    first = series.rows[0]
    assert all(first[c] == 0 for c in series.columns if c.startswith("reserved:"))
    assert series.column("reserved:physical:c") == [0, 0, 0, 0, 1]
    for y in ("y1", "y2", "y3", "y4"):
        assert set(series.column(f"reserved:people:{y}")) == {0}
    totals = series.column("total")
    assert all(b >= a - 1e-9 for a, b in zip(totals, totals[1:]))


def test_probability_sweep_rejects_bad_input():
    inst = default_instance()
    with pytest.raises(ExperimentError, match="outside"):
        sweep_probability(inst, [0.5, 1.2])
    single = inst.with_scenarios(ScenarioSet(inst.scenarios.scenarios[:1], (1.0,)))
    with pytest.raises(ExperimentError, match="two scenarios"):
        sweep_probability(single, [0.5])


def test_probability_grid():
    assert probability_grid(0.25) == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert probability_grid(0.3) == [0.0, 0.3, 0.6, 0.9, 1.0]
    assert len(probability_grid(0.01)) == 101
    with pytest.raises(ExperimentError):
        probability_grid(0)


def test_edge_threshold_matches_cost_ratio():
    result = find_threshold(default_instance(), "edge", 0.05)
    assert result.threshold == pytest.approx(math.ceil(0.07625 / 0.13875 / 0.05) * 0.05)
    assert result.series.rows[-1]["reserved"] == 1
    assert all(r["reserved"] == 0 for r in result.series.rows[:-1])


def test_classroom_threshold_quarter_step():
    assert find_threshold(default_instance(), "physical:c", 0.25).threshold == 1.0


@pytest.mark.parametrize("step", [0.05, 0.025, 0.0125])
def test_threshold_invariant_to_step_refinement(step):
    # the edge ratio 0.5495 sits on none of these grids, so every one ceils to 0.55
    expected = math.ceil(0.07625 / 0.13875 / step) * step
    assert expected == pytest.approx(0.55)
    assert find_threshold(default_instance(), "edge", step).threshold == pytest.approx(0.55)


def test_classroom_tie_on_grid():
    # 3.5 / 4 = 0.875 is a grid point of step 0.025, where both plans cost the same
    threshold = find_threshold(default_instance(), "physical:c", 0.025).threshold
    assert threshold in (pytest.approx(0.875), pytest.approx(0.9))


def test_no_threshold_for_teachers():
    result = find_threshold(default_instance(), "people:y1", 0.25)
    assert result.threshold is None
    assert len(result.series.rows) == 5


def test_compare_single_multiplier():
    series = compare_schemes(default_instance(), [1.0], seeds=range(5))
    row = series.rows[0]
    assert row["total"] <= row["evf_total"] + 1e-6
    assert row["total"] <= row["random_min"] + 1e-6
    assert row["sip_dominates"] == 1


def test_compare_zero_multiplier_makes_recourse_free():
    row = compare_schemes(default_instance(), [0.0], seeds=range(3)).rows[0]
    assert row["total"] == pytest.approx(0.0)
    assert row["evf_total"] >= 0 and row["random_min"] >= 0


def test_compare_evf_gap_widens():
    series = compare_schemes(default_instance(), [1.0, 3.0], seeds=())
    gaps = [r["evf_total"] - r["total"] for r in series.rows]
    assert gaps[1] > gaps[0]
    assert "random_min" not in series.columns


def test_compare_identical_scenarios_evf_equals_sip():
    inst = default_instance(1.0)
    busy = inst.scenarios.scenarios[0]
    inst = inst.with_scenarios(ScenarioSet((busy, busy), (0.5, 0.5)))
    # teachers are never reserved by either scheme here, since none is available
    row = compare_schemes(inst, [1.0], seeds=()).rows[0]
    assert row["evf_total"] == pytest.approx(row["total"], abs=1e-6)


def test_compare_rejects_negative_multiplier():
    with pytest.raises(ExperimentError):
        compare_schemes(default_instance(), [-1.0, 1.0])


def test_csv_is_stable():
    series = sweep_probability(default_instance(), [0.0, 1.0])
    text = series.to_csv()
    header, *rows = text.strip().split("\n")
    assert header.split(",")[:4] == ["p_first", "stage1", "stage2_expected", "total"]
    assert len(rows) == 2
    assert rows[0].startswith("0.000000,0.000000,0.000000,0.000000")
    assert text == sweep_probability(default_instance(), [0.0, 1.0]).to_csv()
