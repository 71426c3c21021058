"""Sweeps over the sharing factor and the IoT VM cap, with CSV reports."""
from __future__ import annotations

import csv
import io
import logging
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .exact import Budget, SolveResult, Status, _better, branch_and_bound, brute_force
from .heuristic import greedy, greedy_local
from .placement import Placement, check_constraints
from .power import PROCESSING_TIER_ORDER, TERMS, PowerBreakdown, evaluate
from .topology import ReferenceConfig, build_reference_topology
from .workload import Scenario, generate_requests

log = logging.getLogger(__name__)

DEFAULT_DELTAS = (0.03, 0.06, 0.10)
DEFAULT_KS = (1, 2)
SOLVERS = ("brute", "bnb", "greedy", "local")
THREADS_ENV = "FOGPLACE_THREADS"

POWER_CSV = "power.csv"
SHARES_CSV = "tier_shares.csv"
SAVINGS_CSV = "savings.csv"


def reference_scenario(seed: int = 7, requests: int = 15, k: int = 1, delta: float = 0.03,
                       config: ReferenceConfig | None = None) -> Scenario:
    """The default experiment: 4 zones of 5 IoT devices, one source, 15 requests."""
    topo = build_reference_topology(config or ReferenceConfig())
    source = topo.sources[0].id
    reqs = generate_requests(seed, requests, source=source, topology=topo)
    return Scenario(topo, reqs, k, delta)


@dataclass
class SweepSpec:
    scenario: Scenario | None = None  # None: reference scenario built from each seed
    delta_values: tuple[float, ...] = DEFAULT_DELTAS
    k_values: tuple[int, ...] = DEFAULT_KS
    solvers: tuple[str, ...] = ("bnb",)
    seed: int = 7
    extra_seeds: tuple[int, ...] = ()
    requests: int = 15  # size of generated reference scenarios
    budget: Budget = field(default_factory=lambda: Budget(time_limit=600.0, node_limit=20_000))
    share_incumbents: bool = True

    def __post_init__(self):
        self.delta_values = tuple(float(d) for d in self.delta_values)
        self.k_values = tuple(int(k) for k in self.k_values)
        self.solvers = tuple(self.solvers)
        if not self.delta_values or not self.k_values or not self.solvers:
            raise ValueError("delta_values, k_values and solvers must be non-empty")
        for d in self.delta_values:
            if not 0 < d <= 1:
                raise ValueError(f"delta {d} outside (0, 1]")
        for k in self.k_values:
            if k < 1:
                raise ValueError(f"k must be a positive integer, got {k}")
        for s in self.solvers:
            if s not in SOLVERS:
                raise ValueError(f"unknown solver {s!r}; choose from {', '.join(SOLVERS)}")
        if self.scenario is not None and self.extra_seeds:
            raise ValueError("extra_seeds only apply to generated reference scenarios")

    @property
    def seeds(self) -> tuple[int, ...]:
        return (self.seed, *self.extra_seeds)

    def base_scenario(self, seed: int) -> Scenario:
        if self.scenario is not None:
            return self.scenario
        return reference_scenario(seed, self.requests)


@dataclass
class SweepRecord:
    delta: float
    k: int
    solver: str
    breakdown: PowerBreakdown | None
    status: Status
    wall_time: float
    objective: float = float("inf")
    lower_bound: float = float("inf")
    seed: int = 0
    placement: Placement | None = None

    @property
    def total(self) -> float:
        return self.breakdown.total if self.breakdown else float("inf")


def solve(scenario: Scenario, solver: str, budget: Budget | None = None,
          initial: list[Placement] | None = None) -> SolveResult:
    if solver == "brute":
        return brute_force(scenario)
    if solver == "bnb":
        seeds = list(initial or [])
        warm = greedy_local(scenario)
        if warm.placement is not None:
            seeds.append(warm.placement)
        res = branch_and_bound(scenario, budget, initial=seeds)
        res.wall_time += warm.wall_time
        return res
    if solver == "greedy":
        return greedy(scenario)
    if solver == "local":
        return greedy_local(scenario)
    raise ValueError(f"unknown solver {solver!r}")


def _run_cell(args) -> tuple[tuple, SolveResult]:
    key, scenario, solver, budget = args
    return key, solve(scenario, solver, budget)


def thread_count(default: int = 1) -> int:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _status_for(objective: float, bound: float) -> Status:
    return Status.FEASIBLE_WITH_GAP if _better(bound, objective) else Status.OPTIMAL


def _share(cells: dict[tuple, SolveResult], scenarios: dict[tuple, Scenario]) -> None:
    """Let every cell of a (seed, solver) group adopt the best placement found by any cell.

    Constraints do not depend on the sharing factor and only loosen as k
    grows, so pooling keeps totals monotone in both.  Bounds are untouched.
    """
    groups: dict[tuple, list[tuple]] = {}
    for key in cells:
        groups.setdefault((key[0], key[3]), []).append(key)
    for members in groups.values():
        pool = [cells[key].placement for key in sorted(members) if cells[key].placement is not None]
        for key in sorted(members):
            res = cells[key]
            if res.status is Status.INFEASIBLE and res.solver == "brute":
                continue
            sc = scenarios[key]
            best, best_obj = res.placement, res.objective
            for cand in pool:
                if cand is best or check_constraints(sc, cand):
                    continue
                obj = evaluate(sc, cand).total
                if _better(obj, best_obj):
                    best, best_obj = cand, obj
            if best is not res.placement:
                log.info("cell %s improved %.6g -> %.6g by a neighbouring cell", key, res.objective, best_obj)
                res.placement, res.objective = best, best_obj
                res.lower_bound = min(res.lower_bound, best_obj)
                res.status = _status_for(best_obj, res.lower_bound)


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[SweepRecord]:
    """Solve every (seed, delta, k, solver) cell; records come back in canonical order."""
    workers = thread_count() if workers is None else workers
    jobs = []
    scenarios: dict[tuple, Scenario] = {}
    for seed in spec.seeds:
        base = spec.base_scenario(seed)
        for delta in spec.delta_values:
            for k in spec.k_values:
                sc = base.with_(delta=delta, k=k)
                for solver in spec.solvers:
                    key = (seed, delta, k, solver)
                    scenarios[key] = sc
                    jobs.append((key, sc, solver, spec.budget))

    cells: dict[tuple, SolveResult] = {}
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, res in pool.map(_run_cell, jobs):
                cells[key] = res
    else:
        for job in jobs:
            key, res = _run_cell(job)
            log.info("cell seed=%s delta=%s k=%s %s: %s %.6g (bound %.6g)",
                     *key, res.status.value, res.objective, res.lower_bound)
            cells[key] = res
    if spec.share_incumbents:
        _share(cells, scenarios)

    records = []
    for key in sorted(cells, key=lambda k: (k[1], k[2], spec.solvers.index(k[3]), k[0])):
        seed, delta, k, solver = key
        res = cells[key]
        bd = evaluate(scenarios[key], res.placement) if res.placement is not None else None
        records.append(SweepRecord(delta, k, solver, bd, res.status, res.wall_time,
                                   res.objective, res.lower_bound, seed, res.placement))
    return records


def compute_savings(records: list[SweepRecord], baseline_k: int = 1, improved_k: int = 2,
                    solver: str | None = None) -> dict[float, float]:
    """Percent power saved by ``improved_k`` over ``baseline_k`` at each delta, averaged over seeds."""
    spread = savings_by_seed(records, baseline_k, improved_k, solver)
    return {d: statistics.fmean(v) for d, v in spread.items()}


def savings_by_seed(records: list[SweepRecord], baseline_k: int = 1, improved_k: int = 2,
                    solver: str | None = None) -> dict[float, list[float]]:
    if solver is None:
        solver = records[0].solver if records else ""
    table: dict[tuple, float] = {}
    for r in records:
        if r.solver == solver:
            table[(r.delta, r.k, r.seed)] = r.total
    out: dict[float, list[float]] = {}
    for delta, _, seed in sorted({(d, 0, s) for d, _, s in table}):
        try:
            base = table[(delta, baseline_k, seed)]
            imp = table[(delta, improved_k, seed)]
        except KeyError as e:
            raise KeyError(f"missing sweep cell for delta={delta}, seed={seed}: k={e.args[0][1]}") from None
        out.setdefault(delta, []).append(100.0 * (base - imp) / base if base else 0.0)
    return out


def _fmt(v: float) -> str:
    return repr(round(v, 9)) if v == v and abs(v) != float("inf") else ""


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def emit_report(records: list[SweepRecord], savings: dict[float, float] | None = None,
                spread: dict[float, list[float]] | None = None) -> dict[str, str]:
    """Three CSV documents keyed by file name; wall times are left out so reruns are identical."""
    multi = len({r.seed for r in records}) > 1
    lead = ["seed"] if multi else []
    tiers = [t.value for t in PROCESSING_TIER_ORDER]

    power_rows, share_rows = [], []
    for r in records:
        head = ([r.seed] if multi else []) + [_fmt(r.delta), r.k, r.solver, r.status.value]
        if r.breakdown is None:
            power_rows.append(head + [""] * (2 + len(TERMS)))
            share_rows.append(head + [""] * len(tiers))
            continue
        bd = r.breakdown
        power_rows.append(head + [_fmt(bd.total), _fmt(r.lower_bound)] + [_fmt(getattr(bd, t)) for t in TERMS])
        share_rows.append(head + [_fmt(bd.tier_workload_share.get(t, 0.0)) for t in PROCESSING_TIER_ORDER])

    cell = ["delta", "k", "solver", "status"]
    docs = {
        POWER_CSV: _csv(lead + cell + ["total", "lower_bound", *TERMS], power_rows),
        SHARES_CSV: _csv(lead + cell + tiers, share_rows),
    }
    savings = savings if savings is not None else {}
    if spread:
        rows = [[_fmt(d), _fmt(savings.get(d, statistics.fmean(v))), _fmt(min(v)), _fmt(max(v)), len(v)]
                for d, v in sorted(spread.items())]
        docs[SAVINGS_CSV] = _csv(["delta", "savings_percent", "min", "max", "seeds"], rows)
    else:
        docs[SAVINGS_CSV] = _csv(["delta", "savings_percent"], [[_fmt(d), _fmt(v)] for d, v in sorted(savings.items())])
    return docs


def write_report(docs: dict[str, str], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in docs.items():
        path = out / name
        path.write_text(text, encoding="utf-8", newline="")
        paths.append(path)
    return paths


def all_solved(records: list[SweepRecord], require: Status = Status.FEASIBLE_WITH_GAP) -> bool:
    """True when every cell reached ``require`` (Optimal satisfies either level)."""
    ok = {Status.OPTIMAL} if require is Status.OPTIMAL else {Status.OPTIMAL, Status.FEASIBLE_WITH_GAP}
    return all(r.status in ok for r in records)
