"""Power objective: network and processing terms for a placement."""
from __future__ import annotations

from dataclasses import dataclass, field

from .model import CompiledScenario
from .placement import (
    DerivedState,
    InfeasiblePlacementError,
    Placement,
    _state_from_eval,
    check_constraints,
    to_assignment,
)
from .topology import NodeTier, Topology, TopologyError
from .workload import Scenario

PROCESSING_TIER_ORDER = (NodeTier.IOT_DEVICE, NodeTier.ACCESS_FOG, NodeTier.METRO_FOG, NodeTier.CLOUD_DC)

TERMS = ("net_proportional", "net_idle", "proc_proportional", "proc_idle", "lan_proportional", "lan_idle")


@dataclass
class PowerBreakdown:
    net_proportional: float
    net_idle: float
    proc_proportional: float
    proc_idle: float
    lan_proportional: float
    lan_idle: float
    tier_workload_share: dict[NodeTier, float] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return (self.net_proportional + self.net_idle + self.proc_proportional
                + self.proc_idle + self.lan_proportional + self.lan_idle)

    @property
    def network(self) -> float:
        return self.net_proportional + self.net_idle

    @property
    def processing(self) -> float:
        return self.proc_proportional + self.proc_idle + self.lan_proportional + self.lan_idle

    def to_dict(self) -> dict:
        d = {t: getattr(self, t) for t in TERMS}
        d["total"] = self.total
        d["tier_workload_share"] = {t.value: v for t, v in self.tier_workload_share.items()}
        return d


def network_power(topology: Topology, state: DerivedState) -> tuple[float, float]:
    """(proportional, idle) power of the networking equipment, in watts."""
    proportional = 0.0
    idle = 0.0
    for node in topology.nodes:
        if node.network is None:
            if state.beta_n.get(node.id):
                raise TopologyError(f"active node {node.id!r} has no network profile")
            continue
        proportional += node.network.energy_per_gbps * state.lambda_n.get(node.id, 0.0)
    for node in topology.nodes:
        if node.network is not None and state.beta_n.get(node.id):
            idle += node.network.idle_power * node.network.delta
    return proportional, idle


def processing_power(topology: Topology, state: DerivedState) -> tuple[float, float, float, float]:
    """(cpu proportional, cpu idle, LAN proportional, LAN idle) in watts."""
    for node_id, omega in state.omega_p.items():
        if omega > 0 and topology[node_id].processor is None:
            raise TopologyError(f"workload placed on {node_id!r}, which has no processor profile")
    procs = [n for n in topology.nodes if n.processor is not None]
    proc_prop = 0.0
    for n in procs:
        proc_prop += n.processor.energy_per_gflops * state.omega_p.get(n.id, 0.0)
    proc_idle = 0.0
    for n in procs:
        proc_idle += state.n_servers.get(n.id, 0) * n.processor.cpu_idle_power
    lan_prop = 0.0
    for n in procs:
        lan_prop += n.processor.lan_energy_per_gbps * state.theta_p.get(n.id, 0.0)
    lan_idle = 0.0
    for n in procs:
        if state.phi_p.get(n.id):
            lan_idle += n.processor.lan_idle_power * n.processor.lan_delta
    return proc_prop, proc_idle, lan_prop, lan_idle


def tier_shares(topology: Topology, omega_p: dict[str, float]) -> dict[NodeTier, float]:
    shares = {t: 0.0 for t in PROCESSING_TIER_ORDER}
    total = sum(omega_p.values())
    if total <= 0:
        return shares
    for node_id, omega in omega_p.items():
        shares[topology[node_id].tier] += omega
    return {t: v / total for t, v in shares.items()}


def breakdown_from_state(topology: Topology, state: DerivedState) -> PowerBreakdown:
    net = network_power(topology, state)
    proc = processing_power(topology, state)
    return PowerBreakdown(*net, *proc, tier_workload_share=tier_shares(topology, state.omega_p))


def evaluate(scenario: Scenario, placement: Placement) -> PowerBreakdown:
    """Power breakdown of a feasible placement; raises on any violated constraint."""
    violations = check_constraints(scenario, placement)
    if violations:
        raise InfeasiblePlacementError(violations)
    c = CompiledScenario.of(scenario)
    state = _state_from_eval(c, c.evaluate(to_assignment(c, placement)))
    return breakdown_from_state(c.topology, state)

