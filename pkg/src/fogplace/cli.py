"""Command-line entry point: generate, solve, sweep, export-lp.

Results go to stdout as JSON (or a file); progress and diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from . import experiments as ex
from .exact import Budget, SearchSpaceTooLarge, Status
from .lpexport import export_lp
from .placement import InfeasiblePlacementError, check_constraints
from .power import evaluate
from .topology import ReferenceConfig, TopologyError, build_reference_topology, iot_id
from .workload import Scenario, ScenarioError, generate_requests, read_scenario, write_scenario

log = logging.getLogger("fogplace")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _duration(text: str) -> float:
    """Seconds, with an optional s/m/h suffix: ``600``, ``600s``, ``10m``."""
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+)\s*([smh]?)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad duration {text!r}; use e.g. 600s, 10m")
    return float(m.group(1)) * {"": 1, "s": 1, "m": 60, "h": 3600}[m.group(2)]


def _delta(text: str) -> float:
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"delta must lie in (0, 1], got {v}")
    return v


def _emit(doc, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def _scenario_from_flags(args) -> Scenario:
    cfg = ReferenceConfig(zones=args.zones, iot_per_zone=args.iot_per_zone,
                          source=args.source, iot_max_cpus=args.iot_cpus)
    topo = build_reference_topology(cfg)
    source = args.source or iot_id(1, 1)
    reqs = generate_requests(args.seed, args.requests, source=source, topology=topo)
    return Scenario(topo, reqs, args.k, args.delta)


def _add_topology_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--zones", type=_positive_int, default=4)
    p.add_argument("--iot-per-zone", type=_positive_int, default=5)
    p.add_argument("--iot-cpus", type=_positive_int, default=ReferenceConfig.iot_max_cpus,
                   help="CPUs per IoT device (default: %(default)s, enough that k binds)")
    p.add_argument("--source", default=None, help="source IoT device id (default: iot-1-1)")
    p.add_argument("--requests", type=_positive_int, default=15)
    p.add_argument("--seed", type=int, default=7)


def cmd_generate(args) -> int:
    sc = _scenario_from_flags(args)
    if args.out:
        write_scenario(sc, args.out)
        log.info("scenario with %d requests written to %s", len(sc.requests), args.out)
    else:
        from .workload import save_scenario
        _emit(save_scenario(sc), None)
    return 0


def _load(args) -> Scenario:
    sc = read_scenario(args.scenario)
    changes = {}
    if getattr(args, "k", None) is not None:
        changes["k"] = args.k
    if getattr(args, "delta", None) is not None:
        changes["delta"] = args.delta
    return sc.with_(**changes) if changes else sc


def cmd_solve(args) -> int:
    sc = _load(args)
    budget = Budget(time_limit=args.budget, node_limit=args.node_limit)
    try:
        res = ex.solve(sc, args.solver, budget)
    except SearchSpaceTooLarge as exc:
        log.error("%s", exc)
        return 2
    doc = res.to_dict()
    doc["gap"] = res.gap
    if res.placement is None:
        _emit(doc, None)
        log.error("no feasible placement: %s", res.status.value)
        return 1
    violations = check_constraints(sc, res.placement)
    if violations:
        for v in violations:
            log.error("violation [%s] %s", v.kind, v.message)
        return 1
    doc["breakdown"] = evaluate(sc, res.placement).to_dict()
    if args.placement_out:
        Path(args.placement_out).write_text(json.dumps(res.placement.to_dict(), indent=2) + "\n")
        log.info("placement written to %s", args.placement_out)
        del doc["placement"]
    _emit(doc, None)
    log.info("%s: %s objective %.6f W, bound %.6f W, %d nodes, %.2f s",
             args.solver, res.status.value, res.objective, res.lower_bound,
             res.nodes_explored, res.wall_time)
    return 0


def cmd_sweep(args) -> int:
    base = _load(args) if args.scenario else None
    spec = ex.SweepSpec(
        scenario=base,
        delta_values=tuple(args.deltas),
        k_values=tuple(args.ks),
        solvers=tuple(args.solvers),
        seed=args.seed,
        extra_seeds=tuple(args.extra_seeds or ()),
        requests=args.requests,
        budget=Budget(time_limit=args.budget, node_limit=args.node_limit),
    )
    records = ex.run_sweep(spec, workers=args.threads)
    spread = None
    savings: dict[float, float] = {}
    if args.baseline_k in spec.k_values and args.improved_k in spec.k_values:
        solver = spec.solvers[0]
        spread = ex.savings_by_seed(records, args.baseline_k, args.improved_k, solver)
        savings = ex.compute_savings(records, args.baseline_k, args.improved_k, solver)
    docs = ex.emit_report(records, savings, spread if len(spec.seeds) > 1 else None)
    paths = ex.write_report(docs, args.out_dir)
    summary = {
        "files": [str(p) for p in paths],
        "savings_percent": {repr(d): v for d, v in savings.items()},
        "cells": [{"seed": r.seed, "delta": r.delta, "k": r.k, "solver": r.solver,
                   "status": r.status.value, "total": r.total if r.breakdown else None,
                   "lower_bound": r.lower_bound, "wall_time": r.wall_time} for r in records],
    }
    _emit(summary, None)
    require = Status.OPTIMAL if args.require == "optimal" else Status.FEASIBLE_WITH_GAP
    if not ex.all_solved(records, require):
        log.error("some cells did not reach %s", require.value)
        return 1
    return 0


def cmd_export_lp(args) -> int:
    sc = _load(args) if args.scenario else _scenario_from_flags(args)
    text = export_lp(sc)
    if args.out:
        Path(args.out).write_text(text)
        log.info("LP model written to %s", args.out)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogplace", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a reference scenario")
    _add_topology_flags(g)
    g.add_argument("--k", type=_positive_int, default=1)
    g.add_argument("--delta", type=_delta, default=0.03)
    g.add_argument("--out", "-o", help="scenario file (default: stdout)")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="place one scenario")
    s.add_argument("scenario")
    s.add_argument("--solver", choices=ex.SOLVERS, default="bnb")
    s.add_argument("--budget", type=_duration, default=600.0, help="B&B time limit, e.g. 600s")
    s.add_argument("--node-limit", type=int, default=None)
    s.add_argument("--k", type=_positive_int, default=None, help="override the scenario's k")
    s.add_argument("--delta", type=_delta, default=None, help="override the scenario's delta")
    s.add_argument("--placement-out", help="write the placement here instead of stdout")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="solve every (delta, k) cell and write CSV reports")
    w.add_argument("--scenario", help="scenario file (default: generated reference scenario)")
    w.add_argument("--deltas", type=_floats, default=list(ex.DEFAULT_DELTAS))
    w.add_argument("--ks", type=_ints, default=list(ex.DEFAULT_KS))
    w.add_argument("--solvers", type=lambda t: [v for v in t.split(",") if v], default=["bnb"])
    w.add_argument("--seed", type=int, default=7)
    w.add_argument("--requests", type=_positive_int, default=15,
                   help="requests in the generated reference scenario")
    w.add_argument("--extra-seeds", type=_ints, default=None,
                   help="more seeds for variance reporting (reference scenario only)")
    w.add_argument("--budget", type=_duration, default=600.0, help="time limit per cell")
    w.add_argument("--node-limit", type=int, default=20_000,
                   help="B&B node limit per cell; keeps sweeps reproducible")
    w.add_argument("--baseline-k", type=int, default=1)
    w.add_argument("--improved-k", type=int, default=2)
    w.add_argument("--require", choices=["feasible", "optimal"], default="feasible")
    w.add_argument("--threads", type=_positive_int, default=None,
                   help=f"parallel cells (default: ${ex.THREADS_ENV} or 1)")
    w.add_argument("--out-dir", default=".")
    w.set_defaults(func=cmd_sweep)

    e = sub.add_parser("export-lp", help="write the full MILP in CPLEX-LP format")
    e.add_argument("--scenario", help="scenario file (default: generated from flags)")
    _add_topology_flags(e)
    e.add_argument("--k", type=_positive_int, default=1)
    e.add_argument("--delta", type=_delta, default=0.03)
    e.add_argument("--out", "-o", help="LP file (default: stdout)")
    e.set_defaults(func=cmd_export_lp)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    log.propagate = False
    try:
        return args.func(args)
    except (ScenarioError, TopologyError, InfeasiblePlacementError, ValueError, KeyError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
