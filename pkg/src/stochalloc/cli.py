"""Command-line entry point.

Exit codes: 0 optimal/success, 2 usage error, 3 invalid input,
4 infeasible, 5 node limit reached, 6 unbounded.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .experiments import (
    ExperimentError,
    compare_schemes,
    default_instance,
    find_threshold,
    parse_target,
    probability_grid,
    small_instance,
    sweep_probability,
    sweep_reservation,
)
from .formulations import SolveError, solve_dip, solve_sip
from .instance_io import InstanceFormatError, dump_instance, load_instance
from .milp import SolverConfig, Status
from .model import ValidationError, expected_demand, TimeQuantum

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID = 3
EXIT_INFEASIBLE = 4
EXIT_NODE_LIMIT = 5
EXIT_UNBOUNDED = 6

_STATUS_EXIT = {
    Status.INFEASIBLE: EXIT_INFEASIBLE,
    Status.NODE_LIMIT: EXIT_NODE_LIMIT,
    Status.UNBOUNDED: EXIT_UNBOUNDED,
}
DEFAULT_MULTIPLIERS = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _r6(value: float) -> float:
    return float(f"{value:.6f}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochalloc", description="Reservation / on-demand resource allocation under uncertain demand.")
    sub = parser.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("--quantum", type=float, help="hours per integer time unit (overrides the instance file)")
        p.add_argument("--node-limit", type=int, default=SolverConfig.node_limit, help="branch-and-bound node limit")
        p.add_argument("--out", help="output path (default: standard output)")

    p = sub.add_parser("solve", help="solve the deterministic (dip) or stochastic (sip) program")
    p.add_argument("instance")
    p.add_argument("--mode", choices=("dip", "sip"), default="sip")
    solver_flags(p)

    p = sub.add_parser("experiment", help="run a parameter study and write CSV")
    p.add_argument("instance")
    p.add_argument("--kind", required=True, choices=("cost-structure", "prob-sweep", "threshold", "compare"))
    p.add_argument("--target", help="resource, e.g. edge, cyber:w, physical:c, people:y1")
    p.add_argument("--step", type=float, help="probability step for threshold / prob-sweep")
    p.add_argument("--grid", type=_floats, help="comma-separated grid values")
    p.add_argument("--multipliers", type=_floats, help="comma-separated on-demand cost multipliers")
    p.add_argument("--seed", type=int, help="first random-scheme seed (default 0)")
    p.add_argument("--num-seeds", type=int, help="number of random-scheme seeds (default 20)")
    solver_flags(p)

    p = sub.add_parser("gen-default", help="print the default instance as JSON")
    p.add_argument("--p-demand", type=float, default=0.6, help="probability of the demand scenario")
    p.add_argument("--teacher-hours", type=float, default=40.0)
    p.add_argument("--small", action="store_true", help="single-user cost-structure instance instead")
    p.add_argument("--out")
    return parser


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load(args) -> tuple:
    instance, params = load_instance(args.instance)
    if args.quantum is not None:
        instance = replace(instance, quantum=TimeQuantum(args.quantum))
    return instance, params


def _config(args) -> SolverConfig:
    return SolverConfig(node_limit=args.node_limit)


def _metadata(args, config: SolverConfig, **extra) -> dict:
    meta = {"solver": asdict(config), "quantum": None}
    meta.update(extra)
    return meta


def cmd_solve(args) -> int:
    instance, _ = _load(args)
    config = _config(args)
    meta = _metadata(args, config, mode=args.mode)
    meta["quantum"] = instance.quantum.hours
    if args.mode == "sip":
        solution = solve_sip(instance, config)
    else:
        demand = None
        if len(instance.scenarios) > 1:
            demand = expected_demand(instance.scenarios)
            meta["demand"] = "expected"
        solution = solve_dip(instance, demand, config)
    costs = solution.costs
    report = {
        "mode": args.mode,
        "status": solution.result.status.value,
        "objective": _r6(solution.objective),
        "costs": {k: ([_r6(x) for x in v] if isinstance(v, list) else _r6(v)) for k, v in costs.to_dict().items()},
        "plan": solution.plan.to_dict(),
        "stats": {"nodes": solution.result.stats.nodes, "lp_iterations": solution.result.stats.lp_iterations},
        "metadata": meta,
    }
    _write(json.dumps(report, indent=2) + "\n", args.out)
    print(f"objective {solution.objective:.6f}", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_experiment(args) -> int:
    instance, params = _load(args)
    config = _config(args)
    kind = args.kind
    target = args.target or params.get("target")
    step = args.step if args.step is not None else params.get("step")
    grid = args.grid if args.grid is not None else params.get("grid")
    meta = _metadata(args, config, kind=kind)
    meta["quantum"] = instance.quantum.hours

    if kind == "cost-structure":
        if not target:
            raise ExperimentError("cost-structure needs --target")
        if grid is None:
            grid = _default_reservation_grid(instance, target)
        series = sweep_reservation(instance, target, [int(g) for g in grid], config)
        meta.update(target=target, grid=[int(g) for g in grid])
    elif kind == "prob-sweep":
        if grid is None:
            grid = probability_grid(step or 0.05)
        series = sweep_probability(instance, grid, config)
        meta.update(grid=list(grid))
    elif kind == "threshold":
        target = target or "edge"
        step = step or 0.01
        result = find_threshold(instance, target, step, config)
        series = result.series
        meta.update(target=target, step=step, threshold=result.threshold)
        msg = "no threshold" if result.threshold is None else f"threshold {result.threshold:.6f}"
        print(msg, file=sys.stderr)
    else:
        multipliers = args.multipliers or params.get("multipliers") or list(DEFAULT_MULTIPLIERS)
        seed = args.seed if args.seed is not None else params.get("seed", 0)
        count = args.num_seeds if args.num_seeds is not None else params.get("num_seeds", 20)
        seeds = list(range(seed, seed + count))
        series = compare_schemes(instance, multipliers, seeds, config)
        meta.update(multipliers=list(multipliers), seeds=seeds)

    _write(series.to_csv(), args.out)
    if args.out:
        Path(str(args.out) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return EXIT_OK


def _default_reservation_grid(instance, target: str) -> list[int]:
    t = parse_target(instance.catalog, target)
    if t.family == "edge":
        return list(range(len(instance.catalog.edge) + 1))
    units = [s.units(instance.quantum) for s in instance.scenarios.scenarios]
    arrays = [getattr(u, t.family) for u in units]
    top = max(int(a[:, t.index].sum()) for a in arrays)
    return list(range(2 * top + 1))


def cmd_gen_default(args) -> int:
    if args.small:
        instance = small_instance(args.p_demand)
    else:
        instance = default_instance(args.p_demand, teacher_hours=args.teacher_hours)
    _write(dump_instance(instance), args.out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"solve": cmd_solve, "experiment": cmd_experiment, "gen-default": cmd_gen_default}[args.command]
    try:
        return handler(args)
    except (InstanceFormatError, ValidationError, ExperimentError, FileNotFoundError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolveError as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return _STATUS_EXIT.get(exc.status, EXIT_INFEASIBLE)


if __name__ == "__main__":
    sys.exit(main())
