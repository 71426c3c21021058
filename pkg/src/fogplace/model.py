"""Index-based view of a scenario shared by the evaluator and the solvers.

Everything here works on integer node indices and flat VM numbers so that
the power objective can be evaluated many thousands of times per second.
``assign[g]`` holds the node index hosting flat VM ``g`` or ``-1`` when the
VM is not placed yet; links touching an unplaced VM are ignored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .topology import NodeTier
from .workload import Scenario

UNASSIGNED = -1
# Relative slack used when rounding workload up to whole CPUs and when
# comparing carried traffic against capacities.
CAPACITY_RTOL = 1e-9


def cpus_needed(omega: float, capacity: float) -> int:
    if omega <= 0:
        return 0
    return max(1, math.ceil(omega / capacity - CAPACITY_RTOL))


@dataclass
class Evaluation:
    omega: list[float]
    count: list[int]
    traffic: dict[tuple[int, int], float]
    lam: list[float]
    theta: list[float]
    beta: list[int]
    phi: list[int]
    n_cpus: list[int]
    net_proportional: float
    net_idle: float
    proc_proportional: float
    proc_idle: float
    lan_proportional: float
    lan_idle: float

    @property
    def total(self) -> float:
        return (self.net_proportional + self.net_idle + self.proc_proportional
                + self.proc_idle + self.lan_proportional + self.lan_idle)


class CompiledScenario:
    def __init__(self, scenario: Scenario):
        topo = scenario.effective_topology
        self.scenario = scenario
        self.topology = topo
        self.node_ids = [n.id for n in topo.nodes]
        self.n_nodes = len(self.node_ids)
        nn = self.n_nodes

        self.eps = [0.0] * nn
        self.net_idle = [0.0] * nn  # idle power already scaled by its sharing factor
        self.has_net = [False] * nn
        self.bitrate_cap = [math.inf] * nn
        self.is_proc = [False] * nn
        self.E = [0.0] * nn
        self.cpu_idle = [0.0] * nn
        self.cpu_cap = [math.inf] * nn
        self.max_cpus = [0] * nn
        self.EL = [0.0] * nn
        self.lan_idle = [0.0] * nn
        self.k_limited = [False] * nn
        self.is_iot = [False] * nn
        for i, node in enumerate(topo.nodes):
            if node.network is not None:
                self.has_net[i] = True
                self.eps[i] = node.network.energy_per_gbps
                self.net_idle[i] = node.network.idle_power * node.network.delta
                self.bitrate_cap[i] = node.network.bitrate_capacity
            if node.processor is not None:
                pp = node.processor
                self.is_proc[i] = True
                self.E[i] = pp.energy_per_gflops
                self.cpu_idle[i] = pp.cpu_idle_power
                self.cpu_cap[i] = pp.cpu_capacity_gflops
                self.max_cpus[i] = pp.max_cpus
                self.EL[i] = pp.lan_energy_per_gbps
                self.lan_idle[i] = pp.lan_idle_power * pp.lan_delta
            if node.tier is NodeTier.IOT_DEVICE:
                self.is_iot[i] = True
                self.k_limited[i] = scenario.cap_source or not node.is_source
        self.proc_nodes = [i for i in range(nn) if self.is_proc[i]]
        self.k = scenario.k

        # Flat VM numbering in (request, vm) order.
        self.vm_keys: list[tuple[int, int]] = []
        self.demand: list[float] = []
        self.is_input: list[bool] = []
        self.pinned: list[int] = []  # source node index for input VMs, else -1
        self.links: list[tuple[int, int, float]] = []
        self.vm_of: dict[tuple[int, int], int] = {}
        for r in scenario.requests:
            base = len(self.vm_keys)
            src = topo.index[r.source_node]
            for vm in r.vms:
                self.vm_of[vm.id] = len(self.vm_keys)
                self.vm_keys.append(vm.id)
                self.demand.append(vm.cpu_demand)
                self.is_input.append(vm.is_input)
                self.pinned.append(src if vm.is_input else UNASSIGNED)
            for link in r.links:
                self.links.append((base + link.from_vm, base + link.to_vm, link.data_rate))
        self.n_vms = len(self.vm_keys)
        # (other VM, rate, True when this VM is the link's origin)
        self.vm_links: list[list[tuple[int, float, bool]]] = [[] for _ in range(self.n_vms)]
        for a, b, rate in self.links:
            self.vm_links[a].append((b, rate, True))
            self.vm_links[b].append((a, rate, False))
        self.active_sources = sorted({p for p in self.pinned if p != UNASSIGNED})
        self.inputs_at: dict[int, int] = {}
        for p in self.pinned:
            if p != UNASSIGNED:
                self.inputs_at[p] = self.inputs_at.get(p, 0) + 1

        self.has_link_caps = bool(topo.link_capacity)
        self._routes: dict[tuple[int, int], tuple[int, ...]] = {}

    @classmethod
    def of(cls, scenario: Scenario) -> "CompiledScenario":
        cached = scenario._compiled
        if cached is None:
            cached = cls(scenario)
            object.__setattr__(scenario, "_compiled", cached)
        return cached

    def route(self, b: int, e: int) -> tuple[int, ...]:
        key = (b, e)
        path = self._routes.get(key)
        if path is None:
            ids = self.topology.route(self.node_ids[b], self.node_ids[e])
            path = tuple(self.topology.index[x] for x in ids)
            self._routes[key] = path
        return path

    def empty_assignment(self) -> list[int]:
        return list(self.pinned)

    # -- evaluation ----------------------------------------------------------

    def traffic(self, assign: list[int]) -> dict[tuple[int, int], float]:
        out: dict[tuple[int, int], float] = {}
        for a, b, rate in self.links:
            pa, pb = assign[a], assign[b]
            if pa == UNASSIGNED or pb == UNASSIGNED or pa == pb:
                continue
            out[(pa, pb)] = out.get((pa, pb), 0.0) + rate
        return out

    def evaluate(self, assign: list[int]) -> Evaluation:
        nn = self.n_nodes
        omega = [0.0] * nn
        count = [0] * nn
        for g, p in enumerate(assign):
            if p != UNASSIGNED:
                omega[p] += self.demand[g]
                count[p] += 1
        traffic = self.traffic(assign)
        lam = [0.0] * nn
        theta = [0.0] * nn
        for (b, e), rate in sorted(traffic.items()):
            for n in self.route(b, e):
                lam[n] += rate
            theta[b] += rate
            theta[e] += rate
        beta = [0] * nn
        for n in range(nn):
            if self.has_net[n] and lam[n] > 0:
                beta[n] = 1
        for s in self.active_sources:
            if self.has_net[s]:
                beta[s] = 1
        phi = [1 if c > 0 else 0 for c in count]
        n_cpus = [cpus_needed(omega[p], self.cpu_cap[p]) if self.is_proc[p] else 0 for p in range(nn)]

        net_prop = sum(self.eps[n] * lam[n] for n in range(nn))
        net_idle = sum(self.net_idle[n] for n in range(nn) if beta[n])
        proc_prop = sum(self.E[p] * omega[p] for p in self.proc_nodes)
        proc_idle = sum(n_cpus[p] * self.cpu_idle[p] for p in self.proc_nodes)
        lan_prop = sum(self.EL[p] * theta[p] for p in self.proc_nodes)
        lan_idle = sum(self.lan_idle[p] for p in self.proc_nodes if phi[p])
        return Evaluation(omega, count, traffic, lam, theta, beta, phi, n_cpus,
                          net_prop, net_idle, proc_prop, proc_idle, lan_prop, lan_idle)

    def objective(self, assign: list[int]) -> float:
        return self.evaluate(assign).total

    # -- feasibility ---------------------------------------------------------

    def can_host(self, p: int, g: int, omega: list[float], count: list[int]) -> bool:
        """Whether VM ``g`` fits at ``p`` given current per-node totals (CPU and VM cap)."""
        if not self.is_proc[p]:
            return False
        if self.k_limited[p] and not self.is_input[g] and self._capped_count(p, count) + 1 > self.k:
            return False
        return cpus_needed(omega[p] + self.demand[g], self.cpu_cap[p]) <= self.max_cpus[p]

    def _capped_count(self, p: int, count: list[int]) -> int:
        # input VMs never count against the cap
        return count[p] - self.inputs_at.get(p, 0)

    def traffic_feasible(self, ev: Evaluation) -> bool:
        for n in range(self.n_nodes):
            if ev.lam[n] > self.bitrate_cap[n] * (1 + CAPACITY_RTOL):
                return False
        if self.has_link_caps:
            for key, load in self.link_loads(ev.traffic).items():
                if load > self.topology.link_capacity[key] * (1 + CAPACITY_RTOL):
                    return False
        return True

    def link_loads(self, traffic: dict[tuple[int, int], float]) -> dict[frozenset, float]:
        loads: dict[frozenset, float] = {}
        for (b, e), rate in traffic.items():
            path = self.route(b, e)
            for m, n in zip(path, path[1:]):
                key = frozenset((self.node_ids[m], self.node_ids[n]))
                if key in self.topology.link_capacity:
                    loads[key] = loads.get(key, 0.0) + rate
        return loads

    def feasible(self, assign: list[int], ev: Evaluation | None = None) -> bool:
        """Full check of a (possibly partial) assignment; inputs assumed pinned."""
        ev = ev or self.evaluate(assign)
        for p in self.proc_nodes:
            if ev.n_cpus[p] > self.max_cpus[p]:
                return False
            if self.k_limited[p] and self._capped_count(p, ev.count) > self.k:
                return False
        for g, p in enumerate(assign):
            if p != UNASSIGNED and not self.is_proc[p]:
                return False
        return self.traffic_feasible(ev)
