"""Virtual requests: chains of VMs standing in for DNN layers."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .topology import NodeTier, Topology, TopologyError


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario data.

    ``field`` names the offending document field when there is one.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class VirtualMachine:
    request: int
    index: int
    cpu_demand: float
    is_input: bool = False

    def __post_init__(self):
        if not self.cpu_demand >= 0:
            raise ScenarioError(
                f"vm ({self.request}, {self.index}): cpu_demand must be >= 0, got {self.cpu_demand}",
                "cpu_demand",
            )

    @property
    def id(self) -> tuple[int, int]:
        return (self.request, self.index)


@dataclass(frozen=True)
class VirtualLink:
    from_vm: int
    to_vm: int
    data_rate: float

    def __post_init__(self):
        if self.from_vm == self.to_vm:
            raise ScenarioError("virtual link endpoints must differ", "links")
        if not self.data_rate >= 0:
            raise ScenarioError("virtual link data_rate must be >= 0", "data_rate")


@dataclass(frozen=True)
class VirtualRequest:
    id: int
    vms: tuple[VirtualMachine, ...]
    links: tuple[VirtualLink, ...]
    source_node: str

    def __post_init__(self):
        object.__setattr__(self, "vms", tuple(self.vms))
        object.__setattr__(self, "links", tuple(self.links))
        if not self.vms:
            raise ScenarioError(f"request {self.id}: needs at least one VM", "vms")
        for i, vm in enumerate(self.vms):
            if vm.index != i or vm.request != self.id:
                raise ScenarioError(f"request {self.id}: VM ids must be ({self.id}, 0..n-1)", "vms")
        if sum(vm.is_input for vm in self.vms) != 1:
            raise ScenarioError(f"request {self.id}: exactly one input VM required", "is_input")
        n = len(self.vms)
        for link in self.links:
            if not (0 <= link.from_vm < n and 0 <= link.to_vm < n):
                raise ScenarioError(f"request {self.id}: link endpoint outside the request", "links")
        if not _connected(n, self.links):
            raise ScenarioError(f"request {self.id}: virtual link graph is not connected", "links")

    @property
    def input_vm(self) -> VirtualMachine:
        return next(vm for vm in self.vms if vm.is_input)


def _connected(n: int, links: Iterable[VirtualLink]) -> bool:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for link in links:
        parent[find(link.from_vm)] = find(link.to_vm)
    return len({find(i) for i in range(n)}) == 1


def chain_request(request_id: int, demands: Sequence[float], data_rate: float, source: str,
                  input_demand: float = 0.0) -> VirtualRequest:
    """Input VM followed by ``demands`` as a linear chain of layers."""
    vms = [VirtualMachine(request_id, 0, input_demand, True)]
    vms += [VirtualMachine(request_id, i, d) for i, d in enumerate(demands, start=1)]
    links = [VirtualLink(i, i + 1, data_rate) for i in range(len(vms) - 1)]
    return VirtualRequest(request_id, tuple(vms), tuple(links), source)


def generate_requests(seed: int, count: int = 15, vm_count_range: tuple[int, int] = (4, 5),
                      demand_range_gflops: tuple[float, float] = (0.6, 10.0),
                      default_data_rate: float = 0.1, source: str = "iot-1-1",
                      input_demand: float = 0.0, topology: Topology | None = None,
                      ) -> list[VirtualRequest]:
    """Seeded chain requests with uniform VM counts and uniform hidden-layer demands.

    Demands are rounded to 0.01 GFLOPS so that scenario files stay readable.
    """
    if count < 1:
        raise ScenarioError("count must be >= 1", "count")
    lo, hi = vm_count_range
    if not (0 < lo <= hi):
        raise ScenarioError("vm_count_range must satisfy 0 < lo <= hi", "vm_count_range")
    dlo, dhi = demand_range_gflops
    if not (0 < dlo <= dhi):
        raise ScenarioError("demand_range_gflops must satisfy 0 < lo <= hi", "demand_range_gflops")
    if default_data_rate < 0:
        raise ScenarioError("default_data_rate must be >= 0", "default_data_rate")
    if topology is not None:
        if source not in topology or topology[source].tier is not NodeTier.IOT_DEVICE:
            raise ScenarioError(f"unknown source node {source!r}", "source")

    rng = random.Random(seed)
    requests = []
    for r in range(count):
        n = rng.randint(lo, hi)
        demands = [round(rng.uniform(dlo, dhi), 2) for _ in range(n - 1)]
        requests.append(chain_request(r, demands, default_data_rate, source, input_demand))
    return requests


def total_demand(requests: Iterable[VirtualRequest]) -> float:
    return sum(vm.cpu_demand for r in requests for vm in r.vms if not vm.is_input)


@dataclass(frozen=True)
class Scenario:
    """A topology, the requests to embed in it, and the per-IoT VM cap ``k``.

    ``delta`` overrides the sharing factor of every shared-tier device when
    set.  ``cap_source`` extends the per-IoT VM cap to source devices, where it
    counts only non-input VMs.
    """
    topology: Topology
    requests: tuple[VirtualRequest, ...]
    k: int
    delta: float | None = None
    cap_source: bool = False
    _compiled: Any = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "requests", tuple(self.requests))
        if int(self.k) != self.k or self.k < 1:
            raise ScenarioError("k must be a positive integer", "k")
        if self.delta is not None and not (0 < self.delta <= 1):
            raise ScenarioError("delta must lie in (0, 1]", "delta")
        ids = [r.id for r in self.requests]
        if len(set(ids)) != len(ids):
            raise ScenarioError("request ids must be unique", "requests")
        for r in self.requests:
            if r.source_node not in self.topology or not self.topology[r.source_node].is_source:
                raise ScenarioError(
                    f"request {r.id}: source {r.source_node!r} is not a flagged source node",
                    "source_node",
                )

    def with_(self, **changes) -> "Scenario":
        return replace(self, _compiled=None, **changes)

    @property
    def effective_topology(self) -> Topology:
        if self.delta is None:
            return self.topology
        return self.topology.with_shared_delta(self.delta)

    def vms(self) -> Iterable[VirtualMachine]:
        for r in self.requests:
            yield from r.vms


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------


def request_to_dict(r: VirtualRequest) -> dict:
    return {
        "id": r.id,
        "source_node": r.source_node,
        "vms": [{"cpu_demand": vm.cpu_demand, "is_input": vm.is_input} for vm in r.vms],
        "links": [[link.from_vm, link.to_vm, link.data_rate] for link in r.links],
    }


def save_scenario(scenario: Scenario) -> dict:
    doc = {
        "k": scenario.k,
        "delta": scenario.delta,
        "cap_source": scenario.cap_source,
        "topology": scenario.topology.to_dict(),
        "requests": [request_to_dict(r) for r in scenario.requests],
    }
    return doc


def _need(doc: Mapping, key: str, where: str = "scenario"):
    if not isinstance(doc, Mapping) or key not in doc:
        raise ScenarioError(f"{where}: missing field {key!r}", key)
    return doc[key]


def request_from_dict(d: Mapping) -> VirtualRequest:
    rid = _need(d, "id", "request")
    vms = []
    for i, v in enumerate(_need(d, "vms", f"request {rid}")):
        demand = _need(v, "cpu_demand", f"request {rid} vm {i}")
        if not isinstance(demand, (int, float)):
            raise ScenarioError(f"request {rid} vm {i}: cpu_demand must be a number", "cpu_demand")
        vms.append(VirtualMachine(rid, i, float(demand), bool(v.get("is_input", False))))
    links = []
    for item in _need(d, "links", f"request {rid}"):
        try:
            a, b, rate = item
        except (TypeError, ValueError):
            raise ScenarioError(f"request {rid}: links must be [from, to, rate] triples", "links") from None
        links.append(VirtualLink(int(a), int(b), float(rate)))
    return VirtualRequest(rid, tuple(vms), tuple(links), _need(d, "source_node", f"request {rid}"))


def load_scenario(doc: Mapping) -> Scenario:
    k = _need(doc, "k")
    if not isinstance(k, int) or isinstance(k, bool):
        raise ScenarioError("k must be an integer", "k")
    try:
        topology = Topology.from_dict(_need(doc, "topology"))
    except TopologyError as exc:
        raise ScenarioError(f"topology: {exc}", "topology") from None
    requests = [request_from_dict(r) for r in _need(doc, "requests")]
    delta = doc.get("delta")
    return Scenario(topology, tuple(requests), k, None if delta is None else float(delta),
                    bool(doc.get("cap_source", False)))


def write_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(save_scenario(scenario), indent=2) + "\n")


def read_scenario(path: str | Path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
    return load_scenario(doc)
