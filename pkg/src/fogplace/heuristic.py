"""Greedy construction and move/swap local search."""
from __future__ import annotations

import math
import time

from .exact import REL_TOL, Budget, SolveResult, Status, _better, _Search
from .model import UNASSIGNED, CompiledScenario
from .placement import InfeasiblePlacementError, Placement, check_constraints, to_assignment
from .workload import Scenario


def root_bound(scenario: Scenario) -> float:
    """Lower bound on the optimum, as computed at the root of branch-and-bound."""
    c = CompiledScenario.of(scenario)
    if not c.feasible(c.empty_assignment()):
        return math.inf
    s = _Search(c, Budget())
    return s.bound(0, s.committed())


def _status(objective: float, bound: float) -> Status:
    return Status.FEASIBLE_WITH_GAP if _better(bound, objective) else Status.OPTIMAL


def greedy(scenario: Scenario) -> SolveResult:
    """Place VMs heaviest first, each on the host with the smallest power increase.

    The increase is measured on the partial placement, so opening a CPU or
    switching on transport equipment counts against the first VM that needs it.
    """
    start = time.perf_counter()
    c = CompiledScenario.of(scenario)
    assign = c.empty_assignment()
    order = sorted((g for g in range(c.n_vms) if not c.is_input[g]), key=lambda g: (-c.demand[g], g))
    evaluated = 0
    current = c.objective(assign)
    for g in order:
        best_p, best_cost = None, math.inf
        for p in c.proc_nodes:
            assign[g] = p
            ev = c.evaluate(assign)
            evaluated += 1
            if not c.feasible(assign, ev):
                continue
            if best_p is None or _better(ev.total, best_cost):
                best_p, best_cost = p, ev.total
        if best_p is None:
            assign[g] = UNASSIGNED
            return SolveResult(None, math.inf, math.inf, Status.INFEASIBLE, evaluated,
                               time.perf_counter() - start, "greedy")
        assign[g] = best_p
        current = best_cost
    bound = root_bound(scenario)
    return SolveResult(Placement.from_assignment(c, assign), current, min(bound, current),
                       _status(current, bound), evaluated, time.perf_counter() - start, "greedy",
                       [(evaluated, current, min(bound, current))])


def local_search(scenario: Scenario, start: Placement, max_iters: int = 1000) -> SolveResult:
    """Best-improvement descent over single-VM moves and pairwise host swaps."""
    t0 = time.perf_counter()
    violations = check_constraints(scenario, start)
    if violations:
        raise InfeasiblePlacementError(violations)
    c = CompiledScenario.of(scenario)
    state = _Search(c, Budget())
    state.load(to_assignment(c, start))
    assign = state.assign
    current = c.objective(assign)
    free = [g for g in range(c.n_vms) if not c.is_input[g]]
    evaluated = 0
    history = [(0, current)]

    def trial() -> float | None:
        nonlocal evaluated
        evaluated += 1
        return state.committed() if state.state_feasible() else None

    for _ in range(max_iters):
        best_obj, best_move = current, None
        for g in free:
            home = state.unplace(g)
            for p in c.proc_nodes:
                if p == home:
                    continue
                state.place(g, p)
                obj = trial()
                if obj is not None and _better(obj, best_obj):
                    best_obj, best_move = obj, ((g, p),)
                state.unplace(g)
            state.place(g, home)
        for i, g in enumerate(free):
            for h in free[i + 1:]:
                pg, ph = assign[g], assign[h]
                if pg == ph:
                    continue
                state.unplace(g)
                state.unplace(h)
                state.place(g, ph)
                state.place(h, pg)
                obj = trial()
                if obj is not None and _better(obj, best_obj):
                    best_obj, best_move = obj, ((g, ph), (h, pg))
                state.unplace(h)
                state.unplace(g)
                state.place(g, pg)
                state.place(h, ph)
        if best_move is None:
            break
        for g, _ in best_move:
            state.unplace(g)
        for g, p in best_move:
            state.place(g, p)
        current = c.objective(assign)
        history.append((evaluated, current))

    final = list(assign)
    current = c.objective(final)
    bound = root_bound(scenario)
    lb = min(bound, current)
    return SolveResult(Placement.from_assignment(c, final), current, lb, _status(current, bound),
                       evaluated, time.perf_counter() - t0, "local",
                       [(n, obj, lb) for n, obj in history])


def greedy_local(scenario: Scenario, max_iters: int = 1000) -> SolveResult:
    """Greedy start refined by local search."""
    g = greedy(scenario)
    if g.placement is None:
        g.solver = "local"
        return g
    res = local_search(scenario, g.placement, max_iters)
    res.wall_time += g.wall_time
    res.nodes_explored += g.nodes_explored
    return res


__all__ = ["greedy", "local_search", "greedy_local", "root_bound", "REL_TOL"]
