"""Placements of VMs on processing nodes, constraint checks and derived state."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Mapping

from .model import UNASSIGNED, CAPACITY_RTOL, CompiledScenario
from .workload import Scenario

TrafficMatrix = dict[tuple[str, str], float]

# Violation kinds
ASSIGNMENT = "assignment"          # every VM placed exactly once on a processing node
INPUT_PINNING = "input_pinning"    # input VMs sit on their request's source
IOT_VM_LIMIT = "iot_vm_limit"      # at most k VMs per capped IoT device
CPU_CAPACITY = "cpu_capacity"
BITRATE_CAPACITY = "bitrate_capacity"


@dataclass(frozen=True)
class Placement:
    assignment: Mapping[tuple[int, int], str]

    def __getitem__(self, vm: tuple[int, int]) -> str:
        return self.assignment[vm]

    def __len__(self) -> int:
        return len(self.assignment)

    def rows(self) -> list[tuple[int, int, str]]:
        return [(r, s, node) for (r, s), node in sorted(self.assignment.items())]

    def to_dict(self) -> dict:
        return {"placement": [{"request": r, "vm": s, "node": n} for r, s, n in self.rows()]}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Placement":
        return cls({(int(row["request"]), int(row["vm"])): str(row["node"]) for row in doc["placement"]})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["request", "vm", "node"])
        w.writerows(self.rows())
        return buf.getvalue()

    @classmethod
    def from_assignment(cls, compiled: CompiledScenario, assign: list[int]) -> "Placement":
        return cls({compiled.vm_keys[g]: compiled.node_ids[p]
                    for g, p in enumerate(assign) if p != UNASSIGNED})


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    subject: object = None


class InfeasiblePlacementError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(v.message for v in violations))


@dataclass
class DerivedState:
    traffic: TrafficMatrix
    lambda_n: dict[str, float]
    beta_n: dict[str, int]
    omega_p: dict[str, float]
    theta_p: dict[str, float]
    n_servers: dict[str, int]
    phi_p: dict[str, int]


def to_assignment(compiled: CompiledScenario, placement: Placement) -> list[int]:
    """Flat node-index vector; raises KeyError on unknown VMs or nodes."""
    assign = [UNASSIGNED] * compiled.n_vms
    index = compiled.topology.index
    for vm, node in placement.assignment.items():
        assign[compiled.vm_of[vm]] = index[node]
    return assign


def traffic_from_placement(scenario: Scenario, placement: Placement) -> TrafficMatrix:
    """Inter-node traffic induced by virtual links whose endpoints are split."""
    c = CompiledScenario.of(scenario)
    ids = c.node_ids
    return {(ids[b], ids[e]): rate for (b, e), rate in sorted(c.traffic(to_assignment(c, placement)).items())}


class CapacityViolationError(ValueError):
    pass


def _state_from_eval(c: CompiledScenario, ev) -> DerivedState:
    ids = c.node_ids
    procs = c.proc_nodes
    nets = [n for n in range(c.n_nodes) if c.has_net[n]]
    return DerivedState(
        traffic={(ids[b], ids[e]): rate for (b, e), rate in sorted(ev.traffic.items())},
        lambda_n={ids[n]: ev.lam[n] for n in range(c.n_nodes)},
        beta_n={ids[n]: ev.beta[n] for n in nets},
        omega_p={ids[p]: ev.omega[p] for p in procs},
        theta_p={ids[p]: ev.theta[p] for p in procs},
        n_servers={ids[p]: ev.n_cpus[p] for p in procs},
        phi_p={ids[p]: ev.phi[p] for p in procs},
    )


def derive_state(scenario: Scenario, placement: Placement, strict: bool = True) -> DerivedState:
    """All auxiliary quantities implied by ``placement``.

    With ``strict`` a node needing more CPUs than it has raises
    :class:`CapacityViolationError`; otherwise the unclamped count is kept.
    """
    c = CompiledScenario.of(scenario)
    ev = c.evaluate(to_assignment(c, placement))
    if strict:
        for p in c.proc_nodes:
            if ev.n_cpus[p] > c.max_cpus[p]:
                raise CapacityViolationError(
                    f"{c.node_ids[p]} needs {ev.n_cpus[p]} CPUs but has {c.max_cpus[p]}"
                )
    return _state_from_eval(c, ev)


def check_constraints(scenario: Scenario, placement: Placement) -> list[Violation]:
    c = CompiledScenario.of(scenario)
    topo = c.topology
    out: list[Violation] = []

    assign = [UNASSIGNED] * c.n_vms
    for vm, node in placement.assignment.items():
        if vm not in c.vm_of:
            out.append(Violation(ASSIGNMENT, f"placement names unknown VM {vm}", vm))
            continue
        if node not in topo:
            out.append(Violation(ASSIGNMENT, f"VM {vm} placed on unknown node {node!r}", vm))
            continue
        if not topo[node].is_processing:
            out.append(Violation(ASSIGNMENT, f"VM {vm} placed on non-processing node {node!r}", vm))
            continue
        assign[c.vm_of[vm]] = topo.index[node]
    for g, key in enumerate(c.vm_keys):
        if key not in placement.assignment:
            out.append(Violation(ASSIGNMENT, f"VM {key} is not placed", key))

    for g, key in enumerate(c.vm_keys):
        if c.is_input[g] and assign[g] != UNASSIGNED and assign[g] != c.pinned[g]:
            out.append(Violation(
                INPUT_PINNING,
                f"input VM {key} must sit on source {c.node_ids[c.pinned[g]]!r}, "
                f"found on {c.node_ids[assign[g]]!r}",
                key,
            ))

    capped_counts: dict[int, int] = {}
    for g, p in enumerate(assign):
        if p != UNASSIGNED and c.k_limited[p] and not c.is_input[g]:
            capped_counts[p] = capped_counts.get(p, 0) + 1
    for p, n in sorted(capped_counts.items()):
        if n > c.k:
            out.append(Violation(IOT_VM_LIMIT, f"{c.node_ids[p]} hosts {n} VMs, limit k={c.k}", c.node_ids[p]))

    ev = c.evaluate(assign)
    for p in c.proc_nodes:
        if ev.n_cpus[p] > c.max_cpus[p]:
            out.append(Violation(
                CPU_CAPACITY,
                f"{c.node_ids[p]} needs {ev.n_cpus[p]} CPUs for {ev.omega[p]:g} GFLOPS, has {c.max_cpus[p]}",
                c.node_ids[p],
            ))
    for n in range(c.n_nodes):
        if ev.lam[n] > c.bitrate_cap[n] * (1 + CAPACITY_RTOL):
            out.append(Violation(
                BITRATE_CAPACITY,
                f"{c.node_ids[n]} carries {ev.lam[n]:g} Gb/s over capacity {c.bitrate_cap[n]:g}",
                c.node_ids[n],
            ))
    if c.has_link_caps:
        for key, load in sorted(c.link_loads(ev.traffic).items(), key=lambda kv: sorted(kv[0])):
            cap = topo.link_capacity[key]
            if load > cap * (1 + CAPACITY_RTOL):
                a, b = sorted(key)
                out.append(Violation(BITRATE_CAPACITY, f"link {a}-{b} carries {load:g} Gb/s over {cap:g}", (a, b)))
    return out


def placement_from_rows(rows: Iterable[tuple[int, int, str]]) -> Placement:
    return Placement({(int(r), int(s)): n for r, s, n in rows})
