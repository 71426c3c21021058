"""Exact minimisation: exhaustive enumeration and depth-first branch-and-bound."""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from enum import Enum

from .model import CAPACITY_RTOL, UNASSIGNED, CompiledScenario, cpus_needed
from .placement import Placement
from .workload import Scenario

REL_TOL = 1e-9
BRUTE_FORCE_CAP = 10**7
# Above this many activation sets the transport part of the bound is dropped.
MAX_ACTIVATION_SETS = 4096


class Status(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE_WITH_GAP = "FeasibleWithGap"
    INFEASIBLE = "Infeasible"
    BUDGET_EXHAUSTED = "BudgetExhausted"


@dataclass
class SolveResult:
    placement: Placement | None
    objective: float
    lower_bound: float
    status: Status
    nodes_explored: int = 0
    wall_time: float = 0.0
    solver: str = ""
    history: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.placement is not None

    @property
    def gap(self) -> float:
        if not self.feasible or self.objective == 0:
            return 0.0
        return max(0.0, (self.objective - self.lower_bound) / abs(self.objective))

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "status": self.status.value,
            "objective": None if math.isinf(self.objective) else self.objective,
            "lower_bound": self.lower_bound,
            "nodes_explored": self.nodes_explored,
            "wall_time": self.wall_time,
            "placement": self.placement.to_dict()["placement"] if self.placement else None,
        }


class SearchSpaceTooLarge(ValueError):
    pass


def _better(a: float, b: float) -> bool:
    """``a`` strictly below ``b`` beyond the relative tolerance."""
    return a < b - REL_TOL * max(1.0, abs(b))


def brute_force(scenario: Scenario, cap: int = BRUTE_FORCE_CAP) -> SolveResult:
    """Enumerate every assignment of the non-input VMs to processing nodes.

    Among equal-power optima the lexicographically smallest assignment
    (by request, VM, node index) wins.
    """
    start = time.perf_counter()
    c = CompiledScenario.of(scenario)
    free = [g for g in range(c.n_vms) if not c.is_input[g]]
    space = len(c.proc_nodes) ** len(free)
    if space > cap:
        raise SearchSpaceTooLarge(
            f"{space} assignments exceed the brute-force cap of {cap}; use branch_and_bound"
        )
    assign = c.empty_assignment()
    best, best_obj = None, math.inf
    leaves = 0
    for combo in itertools.product(c.proc_nodes, repeat=len(free)):
        leaves += 1
        for g, p in zip(free, combo):
            assign[g] = p
        ev = c.evaluate(assign)
        if not c.feasible(assign, ev):
            continue
        if best is None or _better(ev.total, best_obj):
            best, best_obj = list(assign), ev.total
    elapsed = time.perf_counter() - start
    if best is None:
        return SolveResult(None, math.inf, math.inf, Status.INFEASIBLE, leaves, elapsed, "brute")
    return SolveResult(Placement.from_assignment(c, best), best_obj, best_obj, Status.OPTIMAL,
                       leaves, elapsed, "brute")


@dataclass
class Budget:
    time_limit: float | None = None  # seconds
    node_limit: int | None = None


class _Exhausted(Exception):
    pass


class _Search:
    """Mutable search state for branch-and-bound over flat VM assignments."""

    def __init__(self, c: CompiledScenario, budget: Budget):
        self.c = c
        self.budget = budget
        nn = c.n_nodes
        self.assign = c.empty_assignment()
        self.omega = [0.0] * nn
        self.count = [0] * nn
        self.capped = [0] * nn
        self.lam = [0.0] * nn
        self.carry = [0] * nn  # positive-rate flows crossing each node
        self.theta = [0.0] * nn
        self.source_active = [False] * nn
        for s in c.active_sources:
            self.source_active[s] = True
        for g, p in enumerate(self.assign):
            if p != UNASSIGNED:
                self.omega[p] += c.demand[g]
                self.count[p] += 1

        free = [g for g in range(c.n_vms) if not c.is_input[g]]
        self.order = sorted(free, key=lambda g: (-c.demand[g], g))
        self.prefix = [0.0]
        for g in self.order:
            self.prefix.append(self.prefix[-1] + c.demand[g])

        self._setup_symmetry()
        self._setup_activation_sets()

        self.nodes_explored = 0
        self.best: list[int] | None = None
        self.best_obj = math.inf
        self.history: list[tuple[int, float, float]] = []
        self.open_bounds: list[float] = []
        self.root_bound = -math.inf
        self.deadline = None
        if budget.time_limit is not None:
            self.deadline = time.perf_counter() + budget.time_limit

    # -- structure ------------------------------------------------------------

    def _tree_root(self) -> int | None:
        c = self.c
        topo = c.topology
        if len(topo.links) != len(topo.nodes) - 1 or len(c.active_sources) != 1:
            return None
        return c.active_sources[0]

    def _setup_symmetry(self) -> None:
        """Interchangeable sibling subtrees of the tree rooted at the source.

        When two sibling subtrees are isomorphic (profiles included) and both
        hold no VM, only nodes in the lower-indexed one are branched on.
        """
        c = self.c
        nn = c.n_nodes
        self.ancestors: list[list[int]] = [[] for _ in range(nn)]
        self.earlier_twins: dict[int, list[int]] = {}
        self.label: dict[int, tuple] = {}
        self.subtree_use = [0] * nn
        root = self._tree_root()
        self.root = root
        if root is None:
            return
        topo = c.topology
        parent = {root: None}
        order = [root]
        for u in order:
            for v in topo.adjacency[c.node_ids[u]]:
                vi = topo.index[v]
                if vi not in parent:
                    parent[vi] = u
                    order.append(vi)
        self.parent = parent
        children: dict[int, list[int]] = {i: [] for i in range(nn)}
        for v, u in parent.items():
            if u is not None:
                children[u].append(v)
        label: dict[int, tuple] = {}
        for v in reversed(order):
            node = topo.nodes[v]
            link_cap = None
            if parent[v] is not None:
                link_cap = topo.link_capacity.get(frozenset((node.id, c.node_ids[parent[v]])))
            own = (node.tier, node.network, node.processor, c.k_limited[v],
                   node.is_source, v in c.inputs_at, link_cap)
            label[v] = (own, tuple(sorted((label[ch] for ch in children[v]), key=repr)))
        self.label = label
        self.tree_children = {u: sorted(v) for u, v in children.items()}
        for u in range(nn):
            kids = sorted(children[u])
            for i, v in enumerate(kids):
                twins = [w for w in kids[:i] if label[w] == label[v]]
                if twins:
                    self.earlier_twins[v] = twins
        for v in order:
            chain = []
            x = v
            while x is not None and x != root:
                chain.append(x)
                x = parent[x]
            self.ancestors[v] = chain
        for g, p in enumerate(self.assign):
            if p != UNASSIGNED:
                for a in self.ancestors[p]:
                    self.subtree_use[a] += 1

    def canonical(self, assign: list[int]) -> list[int]:
        """Lexicographically smallest relabeling of ``assign`` over interchangeable subtrees.

        Walking VMs in (request, vm) order, each not-yet-mapped node goes to
        the lowest-indexed free twin under its parent's image.
        """
        if self.root is None or not self.earlier_twins:
            return list(assign)
        image = {self.root: self.root}
        taken: set[int] = {self.root}

        def img(v: int) -> int:
            for x in reversed(self.ancestors[v]):
                if x in image:
                    continue
                pu = image[self.parent[x]]
                pick = min(w for w in self.tree_children[pu] if w not in taken and self.label[w] == self.label[x])
                image[x] = pick
                taken.add(pick)
            return image[v]

        return [p if p == UNASSIGNED else img(p) for p in assign]

    def _symmetric_skip(self, p: int) -> bool:
        use = self.subtree_use
        for a in self.ancestors[p]:
            if use[a]:
                continue
            twins = self.earlier_twins.get(a)
            if twins and any(use[t] == 0 for t in twins):
                return True
        return False

    def _setup_activation_sets(self) -> None:
        """Enumerate source-rooted unions of transport paths.

        Every VM of a request is linked to its input by positive-rate links,
        so any node hosting one forces every transport node on its path from
        the source to switch on.  The bound minimises over all such unions.
        """
        c = self.c
        self.act_sets: list[tuple[int, float, list[int]]] = []
        self.path_mask = [0] * c.n_nodes
        self.net_bit: dict[int, int] = {}
        root = self.root
        usable = root is not None and all(self._request_linked(r) for r in c.scenario.requests)
        if not usable:
            return
        net_nodes = [n for n in range(c.n_nodes) if c.has_net[n] and c.net_idle[n] > 0]
        self.net_bit = {n: 1 << i for i, n in enumerate(net_nodes)}
        for p in c.proc_nodes:
            mask = 0
            if p != root:
                for n in c.route(root, p):
                    mask |= self.net_bit.get(n, 0)
            self.path_mask[p] = mask
        # Net-tree parent: nearest transport ancestor towards the source.
        net_parent: dict[int, int | None] = {}
        for n in net_nodes:
            x = self.parent[n]
            while x is not None and x not in self.net_bit:
                x = self.parent[x]
            net_parent[n] = x
        kids: dict[int | None, list[int]] = {}
        for n, par in net_parent.items():
            kids.setdefault(par, []).append(n)

        def subtrees(n: int) -> list[int]:
            # rooted subtrees containing n, as masks
            result = [self.net_bit[n]]
            for ch in kids.get(n, []):
                opts = [0] + subtrees(ch)
                result = [m | o for m in result for o in opts]
                if len(result) > MAX_ACTIVATION_SETS:
                    raise _Exhausted
            return result

        try:
            masks = [0]
            for top in kids.get(None, []):
                masks = [m | o for m in masks for o in [0] + subtrees(top)]
                if len(masks) > MAX_ACTIVATION_SETS:
                    raise _Exhausted
        except _Exhausted:
            self.net_bit = {}
            self.path_mask = [0] * c.n_nodes
            return
        idle_of = {self.net_bit[n]: c.net_idle[n] for n in net_nodes}
        for m in masks:
            cost = sum(v for b, v in idle_of.items() if m & b)
            reach = [p for p in c.proc_nodes if self.path_mask[p] & ~m == 0]
            self.act_sets.append((m, cost, reach))
        self.act_sets.sort(key=lambda t: t[1])

    def _request_linked(self, r) -> bool:
        n = len(r.vms)
        seen = {r.input_vm.index}
        frontier = [r.input_vm.index]
        adj: dict[int, list[int]] = {}
        for link in r.links:
            if link.data_rate > 0:
                adj.setdefault(link.from_vm, []).append(link.to_vm)
                adj.setdefault(link.to_vm, []).append(link.from_vm)
        while frontier:
            u = frontier.pop()
            for v in adj.get(u, []):
                if v not in seen:
                    seen.add(v)
                    frontier.append(v)
        return len(seen) == n

    # -- incremental state ------------------------------------------------------

    def _flows(self, g: int, p: int):
        """Routed flows between VM ``g`` at ``p`` and its placed neighbours."""
        c = self.c
        a = self.assign
        for h, rate, outgoing in c.vm_links[g]:
            q = a[h]
            if q == UNASSIGNED or q == p:
                continue
            yield (c.route(p, q) if outgoing else c.route(q, p)), rate, q

    def place(self, g: int, p: int) -> None:
        c = self.c
        self.assign[g] = UNASSIGNED  # own links are not yet counted
        for path, rate, q in self._flows(g, p):
            for n in path:
                self.lam[n] += rate
                if rate > 0:
                    self.carry[n] += 1
            self.theta[p] += rate
            self.theta[q] += rate
        self.assign[g] = p
        self.omega[p] += c.demand[g]
        self.count[p] += 1
        if c.k_limited[p]:
            self.capped[p] += 1
        for x in self.ancestors[p]:
            self.subtree_use[x] += 1

    def unplace(self, g: int) -> int:
        c = self.c
        p = self.assign[g]
        self.assign[g] = UNASSIGNED
        for path, rate, q in self._flows(g, p):
            for n in path:
                self.lam[n] -= rate
                if rate > 0:
                    self.carry[n] -= 1
                if self.carry[n] == 0 and self.lam[n] < 1e-12:
                    self.lam[n] = 0.0
            self.theta[p] -= rate
            self.theta[q] -= rate
        self.omega[p] -= c.demand[g]
        self.count[p] -= 1
        if self.count[p] == 0:
            self.omega[p] = 0.0
            self.theta[p] = 0.0
        if c.k_limited[p]:
            self.capped[p] -= 1
        for x in self.ancestors[p]:
            self.subtree_use[x] -= 1
        return p

    def load(self, assign: list[int]) -> None:
        for g, p in enumerate(assign):
            if p != UNASSIGNED and self.assign[g] == UNASSIGNED:
                self.place(g, p)

    def state_feasible(self) -> bool:
        """CPU, VM-cap and bitrate limits for the current (partial) assignment."""
        c = self.c
        for p in c.proc_nodes:
            if cpus_needed(self.omega[p], c.cpu_cap[p]) > c.max_cpus[p]:
                return False
            if c.k_limited[p] and self.capped[p] > c.k:
                return False
        for n in range(c.n_nodes):
            if self.lam[n] > c.bitrate_cap[n] * (1 + CAPACITY_RTOL):
                return False
        if c.has_link_caps:
            return c.traffic_feasible(c.evaluate(self.assign))
        return True

    def committed(self) -> float:
        c = self.c
        net_prop = 0.0
        net_idle = 0.0
        for n in range(c.n_nodes):
            if c.has_net[n]:
                net_prop += c.eps[n] * self.lam[n]
                if self.carry[n] > 0 or self.source_active[n]:
                    net_idle += c.net_idle[n]
        proc = 0.0
        for p in c.proc_nodes:
            om = self.omega[p]
            proc += c.E[p] * om + cpus_needed(om, c.cpu_cap[p]) * c.cpu_idle[p] + c.EL[p] * self.theta[p]
            if self.count[p]:
                proc += c.lan_idle[p]
        return net_prop + net_idle + proc

    def active_mask(self) -> int:
        m = 0
        for n, bit in self.net_bit.items():
            if self.carry[n] > 0 or self.source_active[n]:
                m |= bit
        return m

    def feasible_here(self, g: int, p: int) -> bool:
        c = self.c
        if c.k_limited[p] and self.capped[p] + 1 > c.k:
            return False
        return cpus_needed(self.omega[p] + c.demand[g], c.cpu_cap[p]) <= c.max_cpus[p]

    # -- bound ------------------------------------------------------------------

    def bound(self, depth: int, committed: float) -> float:
        """Admissible lower bound on every completion of the current partial placement."""
        c = self.c
        remaining = self.prefix[-1] - self.prefix[depth]
        n_left = len(self.order) - depth
        segments = []
        for p in c.proc_nodes:
            om = self.omega[p]
            cap = c.cpu_cap[p]
            room = c.max_cpus[p] * cap - om
            if room <= 0:
                continue
            absorb = room
            if c.k_limited[p]:
                slots = c.k - self.capped[p]
                if slots <= 0:
                    continue
                absorb = min(absorb, self.prefix[min(depth + slots, len(self.order))] - self.prefix[depth])
            if absorb <= 0:
                continue
            slack = cpus_needed(om, cap) * cap - om
            first = min(max(slack, 0.0), absorb)
            if first > 0:
                segments.append((c.E[p], first, p))
            if absorb - first > 0:
                segments.append((c.E[p] + c.cpu_idle[p] / cap, absorb - first, p))
        segments.sort()
        if n_left == 0:
            return committed

        if not self.act_sets:
            fill = _fill(segments, remaining, None)
            return committed + fill

        required = self.active_mask()
        for g in range(c.n_vms):
            p = self.assign[g]
            if p != UNASSIGNED:
                required |= self.path_mask[p]
        active = self.active_mask()
        active_cost = sum(c.net_idle[n] for n, bit in self.net_bit.items() if active & bit)
        best = math.inf
        for mask, cost, reach in self.act_sets:
            if required & ~mask:
                continue
            extra = cost - active_cost
            if extra >= best:
                break
            allowed = self._reach_flags(mask, reach)
            fill = _fill(segments, remaining, allowed)
            if extra + fill < best:
                best = extra + fill
        return committed + best

    def _reach_flags(self, mask: int, reach: list[int]) -> list[bool]:
        cache = self.__dict__.setdefault("_reach_cache", {})
        flags = cache.get(mask)
        if flags is None:
            flags = [False] * self.c.n_nodes
            for p in reach:
                flags[p] = True
            cache[mask] = flags
        return flags

    # -- search -----------------------------------------------------------------

    def offer(self, assign: list[int]) -> None:
        c = self.c
        ev = c.evaluate(assign)
        if not c.feasible(assign, ev):
            return
        obj = ev.total
        canon = self.canonical(assign)
        if canon != assign:
            cev = c.evaluate(canon)
            # a relabeling that changed anything is a bug; keep the raw assignment then
            if c.feasible(canon, cev) and not _better(obj, cev.total) and not _better(cev.total, obj):
                assign = canon
        if self.best is None or _better(obj, self.best_obj):
            self.best, self.best_obj = list(assign), obj
            self.history.append((self.nodes_explored, obj, min(self.root_bound, obj)))
        elif not _better(self.best_obj, obj) and assign < self.best:
            self.best = list(assign)

    def check_budget(self) -> None:
        b = self.budget
        if b.node_limit is not None and self.nodes_explored > b.node_limit:
            raise _Exhausted
        if self.deadline is not None and (self.nodes_explored & 31) == 0 and time.perf_counter() > self.deadline:
            raise _Exhausted

    def prune(self, lb: float) -> bool:
        # Subtrees that can only tie are kept so the lexicographic tie-break matches brute force.
        return self.best is not None and _better(self.best_obj, lb)

    def children(self, depth: int) -> list[int]:
        c = self.c
        g = self.order[depth]
        base = self.committed()
        scored = []
        for p in c.proc_nodes:
            if not self.feasible_here(g, p) or self._symmetric_skip(p):
                continue
            self.place(g, p)
            scored.append((self.committed() - base, p))
            self.unplace(g)
        scored.sort()
        return [p for _, p in scored]

    def dfs(self, depth: int, lb: float) -> None:
        self.nodes_explored += 1
        try:
            self.check_budget()
        except _Exhausted:
            self.open_bounds.append(lb)
            raise
        if depth == len(self.order):
            self.offer(self.assign)
            return
        g = self.order[depth]
        kids = self.children(depth)
        for i, p in enumerate(kids):
            self.place(g, p)
            child_lb = self.bound(depth + 1, self.committed())
            try:
                if not self.prune(child_lb):
                    self.dfs(depth + 1, child_lb)
            except _Exhausted:
                self.unplace(g)
                self._record_open(depth, kids[i + 1:])
                raise
            self.unplace(g)

    def _record_open(self, depth: int, rest: list[int]) -> None:
        g = self.order[depth]
        for p in rest:
            self.place(g, p)
            lb = self.bound(depth + 1, self.committed())
            self.unplace(g)
            if not self.prune(lb):
                self.open_bounds.append(lb)


def _fill(segments, demand: float, allowed) -> float:
    """Cheapest fractional spread of ``demand`` GFLOPS over cost segments."""
    if demand <= 1e-12:
        return 0.0
    cost = 0.0
    left = demand
    for unit, amount, p in segments:
        if allowed is not None and not allowed[p]:
            continue
        take = amount if amount < left else left
        cost += unit * take
        left -= take
        if left <= 1e-12:
            return cost
    return math.inf


def branch_and_bound(scenario: Scenario, budget: Budget | None = None,
                     initial: list[Placement] | None = None, warm_start: bool = True) -> SolveResult:
    """Depth-first branch-and-bound.

    VMs are branched in descending demand order and candidate hosts in order
    of their immediate power increase.  ``initial`` placements (and, with
    ``warm_start``, the greedy placement) seed the incumbent.
    """
    from .heuristic import greedy
    from .placement import to_assignment

    start = time.perf_counter()
    budget = budget or Budget()
    c = CompiledScenario.of(scenario)
    s = _Search(c, budget)

    seeds = list(initial or [])
    if warm_start:
        g = greedy(scenario)
        if g.placement is not None:
            seeds.append(g.placement)
    for pl in seeds:
        try:
            s.offer(to_assignment(c, pl))
        except (KeyError, IndexError):
            continue

    exhausted = False
    if c.feasible(s.assign):
        s.root_bound = s.bound(0, s.committed())
        if not s.prune(s.root_bound):
            try:
                s.dfs(0, s.root_bound)
            except _Exhausted:
                exhausted = True
    elapsed = time.perf_counter() - start

    if exhausted:
        lb = min([s.best_obj, *s.open_bounds])
    else:
        lb = s.best_obj
    if s.best is None:
        status = Status.BUDGET_EXHAUSTED if exhausted else Status.INFEASIBLE
        return SolveResult(None, math.inf, lb, status, s.nodes_explored, elapsed, "bnb", s.history)
    status = Status.FEASIBLE_WITH_GAP if _better(lb, s.best_obj) else Status.OPTIMAL
    if status is Status.OPTIMAL:
        lb = s.best_obj
    s.history.append((s.nodes_explored, s.best_obj, lb))
    return SolveResult(Placement.from_assignment(c, s.best), s.best_obj, lb, status,
                       s.nodes_explored, elapsed, "bnb", s.history)
