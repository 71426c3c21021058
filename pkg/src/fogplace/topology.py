"""Physical IoT -> fog -> cloud network: typed nodes, power profiles, routing.

The reference network is a tree, so every pair of nodes is joined by a
single simple path.  Routes are computed once per source by BFS and cached.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import profiles as tables


class TopologyError(ValueError):
    pass


class NodeTier(str, Enum):
    IOT_DEVICE = "IoTDevice"
    ONU_AP = "OnuAp"
    OLT = "Olt"
    ACCESS_FOG = "AccessFog"
    METRO_SWITCH = "MetroSwitch"
    METRO_ROUTER = "MetroRouter"
    METRO_FOG = "MetroFog"
    CORE_NODE = "CoreNode"
    CLOUD_DC = "CloudDc"


PROCESSING_TIERS = frozenset(
    {NodeTier.IOT_DEVICE, NodeTier.ACCESS_FOG, NodeTier.METRO_FOG, NodeTier.CLOUD_DC}
)
# Highly shared equipment whose idle power is only partly charged to the application.
SHARED_TIERS = frozenset(
    {
        NodeTier.OLT,
        NodeTier.METRO_SWITCH,
        NodeTier.METRO_ROUTER,
        NodeTier.CORE_NODE,
        NodeTier.METRO_FOG,
        NodeTier.CLOUD_DC,
    }
)


def _check_delta(delta: float, what: str) -> None:
    if not (0.0 < delta <= 1.0):
        raise TopologyError(f"{what}: delta must lie in (0, 1], got {delta}")


@dataclass(frozen=True)
class NetworkProfile:
    energy_per_gbps: float
    idle_power: float
    bitrate_capacity: float
    delta: float = 1.0

    def __post_init__(self):
        for name in ("energy_per_gbps", "idle_power", "bitrate_capacity"):
            if getattr(self, name) < 0:
                raise TopologyError(f"network profile: {name} must be >= 0")
        _check_delta(self.delta, "network profile")

    @classmethod
    def from_row(cls, row: tables.NetRow, delta: float = 1.0,
                 idle_fraction: float = tables.CORE_IDLE_FRACTION) -> "NetworkProfile":
        return cls(row.efficiency, tables.idle_or_fraction(row, idle_fraction), row.gbps, delta)


@dataclass(frozen=True)
class ProcessorProfile:
    energy_per_gflops: float
    cpu_idle_power: float
    cpu_capacity_gflops: float
    max_cpus: int
    lan_energy_per_gbps: float = 0.0
    lan_idle_power: float = 0.0
    lan_delta: float = 1.0  # sharing factor applied to lan_idle_power

    def __post_init__(self):
        for name in ("energy_per_gflops", "cpu_idle_power", "lan_energy_per_gbps", "lan_idle_power"):
            if getattr(self, name) < 0:
                raise TopologyError(f"processor profile: {name} must be >= 0")
        if self.cpu_capacity_gflops <= 0:
            raise TopologyError("processor profile: cpu_capacity_gflops must be > 0")
        # zero CPUs is allowed: such a node can only hold zero-demand VMs
        if int(self.max_cpus) != self.max_cpus or self.max_cpus < 0:
            raise TopologyError("processor profile: max_cpus must be an integer >= 0")
        _check_delta(self.lan_delta, "processor profile")

    @property
    def total_capacity(self) -> float:
        return self.max_cpus * self.cpu_capacity_gflops

    @classmethod
    def from_row(cls, row: tables.CpuRow, max_cpus: int, lan_energy_per_gbps: float = 0.0,
                 lan_idle_power: float = 0.0, lan_delta: float = 1.0) -> "ProcessorProfile":
        return cls(row.efficiency, row.idle_w, row.gflops, max_cpus,
                   lan_energy_per_gbps, lan_idle_power, lan_delta)


@dataclass(frozen=True)
class Node:
    id: str
    tier: NodeTier
    zone: int | None = None
    network: NetworkProfile | None = None
    processor: ProcessorProfile | None = None
    is_source: bool = False

    def __post_init__(self):
        if not isinstance(self.tier, NodeTier):
            object.__setattr__(self, "tier", NodeTier(self.tier))
        processing = self.tier in PROCESSING_TIERS
        if processing != (self.processor is not None):
            raise TopologyError(
                f"node {self.id!r}: processor profile must be present exactly on processing tiers"
            )
        if self.is_source and self.tier is not NodeTier.IOT_DEVICE:
            raise TopologyError(f"node {self.id!r}: only IoT devices can be sources")

    @property
    def is_processing(self) -> bool:
        return self.processor is not None


class Topology:
    """Immutable undirected graph of typed nodes.

    ``link_capacity`` optionally bounds the traffic carried by individual
    links (Gb/s); links without an entry are unbounded.
    """

    def __init__(self, nodes: Iterable[Node], links: Iterable[tuple[str, str]],
                 link_capacity: Mapping[tuple[str, str], float] | None = None,
                 unique_paths: bool = False):
        self.nodes: tuple[Node, ...] = tuple(nodes)
        self._by_id = {n.id: n for n in self.nodes}
        if len(self._by_id) != len(self.nodes):
            raise TopologyError("duplicate node ids")
        self.index = {n.id: i for i, n in enumerate(self.nodes)}

        seen = set()
        norm_links = []
        for a, b in links:
            if a == b:
                raise TopologyError(f"self-loop on {a!r}")
            for x in (a, b):
                if x not in self._by_id:
                    raise TopologyError(f"link references unknown node {x!r}")
            key = frozenset((a, b))
            if key in seen:
                raise TopologyError(f"duplicate link {a!r}-{b!r}")
            seen.add(key)
            norm_links.append((a, b))
        self.links: tuple[tuple[str, str], ...] = tuple(norm_links)

        self.link_capacity: dict[frozenset, float] = {}
        for (a, b), cap in (link_capacity or {}).items():
            key = frozenset((a, b))
            if key not in seen:
                raise TopologyError(f"capacity given for missing link {a!r}-{b!r}")
            if cap <= 0:
                raise TopologyError(f"link {a!r}-{b!r}: capacity must be > 0")
            self.link_capacity[key] = float(cap)

        adj: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for a, b in self.links:
            adj[a].append(b)
            adj[b].append(a)
        self.adjacency: dict[str, tuple[str, ...]] = {
            k: tuple(sorted(v, key=self.index.__getitem__)) for k, v in adj.items()
        }
        self._parents: dict[str, dict[str, str | None]] = {}

        if self.nodes and len(self._bfs(self.nodes[0].id)) != len(self.nodes):
            raise TopologyError("topology is not connected")
        if unique_paths and len(self.links) != len(self.nodes) - 1:
            raise TopologyError("unique-path topology must be a tree")
        self.unique_paths = unique_paths

    # -- lookups -------------------------------------------------------------

    def __getitem__(self, node_id: str) -> Node:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise TopologyError(f"unknown node {node_id!r}") from None

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._by_id

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Topology):
            return NotImplemented
        return (self.nodes == other.nodes
                and {frozenset(link) for link in self.links} == {frozenset(link) for link in other.links}
                and self.link_capacity == other.link_capacity)

    def __repr__(self) -> str:
        return f"Topology({len(self.nodes)} nodes, {len(self.links)} links)"

    @property
    def processing_nodes(self) -> tuple[Node, ...]:
        return tuple(n for n in self.nodes if n.is_processing)

    @property
    def sources(self) -> tuple[Node, ...]:
        return tuple(n for n in self.nodes if n.is_source)

    def nodes_of(self, tier: NodeTier) -> tuple[Node, ...]:
        return tuple(n for n in self.nodes if n.tier is tier)

    # -- routing -------------------------------------------------------------

    def _bfs(self, root: str) -> dict[str, str | None]:
        parents = self._parents.get(root)
        if parents is not None:
            return parents
        parents = {root: None}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if v not in parents:
                    parents[v] = u
                    queue.append(v)
        self._parents[root] = parents
        return parents

    def route(self, b: str, e: str) -> list[str]:
        """Node sequence from ``b`` to ``e``, both endpoints included."""
        for x in (b, e):
            if x not in self._by_id:
                raise TopologyError(f"unknown node {x!r}")
        if b == e:
            raise TopologyError("route endpoints must differ")
        parents = self._bfs(e)
        path = [b]
        while path[-1] != e:
            path.append(parents[path[-1]])
        return path

    # -- derived copies ------------------------------------------------------

    def with_shared_delta(self, delta: float) -> "Topology":
        """Copy with ``delta`` applied to every shared-tier idle term."""
        _check_delta(delta, "shared delta")
        nodes = []
        for n in self.nodes:
            if n.tier in SHARED_TIERS:
                net = n.network and replace(n.network, delta=delta)
                proc = n.processor and replace(n.processor, lan_delta=delta)
                n = replace(n, network=net, processor=proc)
            nodes.append(n)
        caps = {tuple(k): v for k, v in self.link_capacity.items()}
        return Topology(nodes, self.links, caps, self.unique_paths)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        nodes = []
        for n in self.nodes:
            d = {"id": n.id, "tier": n.tier.value}
            if n.zone is not None:
                d["zone"] = n.zone
            if n.network is not None:
                d["network"] = asdict(n.network)
            if n.processor is not None:
                d["processor"] = asdict(n.processor)
            if n.is_source:
                d["is_source"] = True
            nodes.append(d)
        doc = {"nodes": nodes, "links": [list(link) for link in self.links],
               "unique_paths": self.unique_paths}
        if self.link_capacity:
            doc["link_capacity"] = [
                [*sorted(k, key=self.index.__getitem__), v] for k, v in self.link_capacity.items()
            ]
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Topology":
        try:
            nodes = []
            for d in doc["nodes"]:
                nodes.append(Node(
                    id=d["id"],
                    tier=NodeTier(d["tier"]),
                    zone=d.get("zone"),
                    network=NetworkProfile(**d["network"]) if d.get("network") else None,
                    processor=ProcessorProfile(**d["processor"]) if d.get("processor") else None,
                    is_source=bool(d.get("is_source", False)),
                ))
            links = [tuple(link) for link in doc["links"]]
            caps = {(a, b): c for a, b, c in doc.get("link_capacity", [])}
        except KeyError as exc:
            raise TopologyError(f"topology document missing field {exc.args[0]!r}") from None
        except TypeError as exc:
            raise TopologyError(f"malformed topology document: {exc}") from None
        return cls(nodes, links, caps, bool(doc.get("unique_paths", False)))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Topology":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Reference network
# ---------------------------------------------------------------------------


@dataclass
class ReferenceConfig:
    """Knobs for the reference access/metro/core tree.

    ``iot_per_zone`` may be a single count or one count per zone.
    """
    zones: int = 4
    iot_per_zone: int | Sequence[int] = 5
    core_hops: int = 1
    source: str | None = None  # defaults to the first device of zone 1
    delta: float = 0.03
    iot_max_cpus: int = 8  # ample: large enough that k, not CPU count, limits IoT hosting
    afn_max_cpus: int = 8
    mfn_max_cpus: int = 12
    cloud_max_cpus: int = 64
    lan_energy_per_gbps: float = 0.0
    lan_idle_power: float = 0.0
    iot_cpu: tables.CpuRow = field(default=tables.IOT_CPU)
    afn_cpu: tables.CpuRow = field(default=tables.AFN_CPU)
    mfn_cpu: tables.CpuRow = field(default=tables.MFN_CPU)
    cloud_cpu: tables.CpuRow = field(default=tables.CLOUD_CPU)

    def zone_sizes(self) -> list[int]:
        if isinstance(self.iot_per_zone, int):
            return [self.iot_per_zone] * self.zones
        sizes = list(self.iot_per_zone)
        if len(sizes) != self.zones:
            raise TopologyError("iot_per_zone list length must equal zones")
        return sizes


def iot_id(zone: int, i: int) -> str:
    return f"iot-{zone}-{i}"


def build_reference_topology(cfg: ReferenceConfig | None = None) -> Topology:
    """IoT zones behind ONU APs, a PON OLT with an access fog node, a metro
    switch with a metro fog node, metro router, ``core_hops`` IP/WDM nodes and
    one cloud data center.
    """
    cfg = cfg or ReferenceConfig()
    if cfg.zones < 1:
        raise TopologyError("zone count must be >= 1")
    sizes = cfg.zone_sizes()
    if any(s < 1 for s in sizes):
        raise TopologyError("each zone needs at least one IoT device")
    if cfg.core_hops < 1:
        raise TopologyError("core_hops must be >= 1")
    for name in ("iot_max_cpus", "afn_max_cpus", "mfn_max_cpus", "cloud_max_cpus"):
        if getattr(cfg, name) < 1:
            raise TopologyError(f"{name} must be >= 1")
    _check_delta(cfg.delta, "reference config")
    source = cfg.source or iot_id(1, 1)

    lan = dict(lan_energy_per_gbps=cfg.lan_energy_per_gbps, lan_idle_power=cfg.lan_idle_power)
    iot_proc = ProcessorProfile.from_row(cfg.iot_cpu, cfg.iot_max_cpus, **lan)
    afn_proc = ProcessorProfile.from_row(cfg.afn_cpu, cfg.afn_max_cpus, **lan)
    mfn_proc = ProcessorProfile.from_row(cfg.mfn_cpu, cfg.mfn_max_cpus, lan_delta=cfg.delta, **lan)
    cloud_proc = ProcessorProfile.from_row(cfg.cloud_cpu, cfg.cloud_max_cpus, lan_delta=cfg.delta, **lan)

    onu = NetworkProfile.from_row(tables.ONU_AP, 1.0, tables.ACCESS_IDLE_FRACTION)
    olt = NetworkProfile.from_row(tables.OLT, cfg.delta)
    switch = NetworkProfile.from_row(tables.METRO_SWITCH, cfg.delta)
    router = NetworkProfile.from_row(tables.METRO_ROUTER_PORT, cfg.delta)
    core = NetworkProfile.from_row(tables.IP_WDM_NODE, cfg.delta)

    nodes: list[Node] = []
    links: list[tuple[str, str]] = []
    for z, size in enumerate(sizes, start=1):
        for i in range(1, size + 1):
            nid = iot_id(z, i)
            nodes.append(Node(nid, NodeTier.IOT_DEVICE, zone=z, processor=iot_proc,
                              is_source=(nid == source)))
            links.append((nid, f"onu-{z}"))
    if not any(n.is_source for n in nodes):
        raise TopologyError(f"source {source!r} is not an IoT device of this topology")
    for z in range(1, cfg.zones + 1):
        nodes.append(Node(f"onu-{z}", NodeTier.ONU_AP, zone=z, network=onu))
        links.append((f"onu-{z}", "olt"))
    nodes += [
        Node("olt", NodeTier.OLT, network=olt),
        Node("afn", NodeTier.ACCESS_FOG, processor=afn_proc),
        Node("metro-switch", NodeTier.METRO_SWITCH, network=switch),
        Node("mfn", NodeTier.METRO_FOG, processor=mfn_proc),
        Node("metro-router", NodeTier.METRO_ROUTER, network=router),
    ]
    links += [("afn", "olt"), ("olt", "metro-switch"), ("mfn", "metro-switch"),
              ("metro-switch", "metro-router")]
    prev = "metro-router"
    for j in range(1, cfg.core_hops + 1):
        nodes.append(Node(f"core-{j}", NodeTier.CORE_NODE, network=core))
        links.append((prev, f"core-{j}"))
        prev = f"core-{j}"
    nodes.append(Node("cloud", NodeTier.CLOUD_DC, processor=cloud_proc))
    links.append((prev, "cloud"))
    return Topology(nodes, links, unique_paths=True)


# ---------------------------------------------------------------------------
# Traffic aggregation
# ---------------------------------------------------------------------------


def _check_demands(topology: Topology, demands: Mapping[tuple[str, str], float]) -> None:
    for (b, e), rate in demands.items():
        if b == e:
            raise TopologyError(f"demand ({b!r}, {e!r}) has identical endpoints")
        if not topology[b].is_processing or not topology[e].is_processing:
            raise TopologyError(f"demand ({b!r}, {e!r}) references a non-processing node")
        if rate < 0 or math.isnan(rate):
            raise TopologyError(f"demand ({b!r}, {e!r}) must be >= 0")


def aggregate_node_traffic(topology: Topology, demands: Mapping[tuple[str, str], float]) -> dict[str, float]:
    """Traffic handled by each node: every flow counts once at each node of its route."""
    _check_demands(topology, demands)
    load = {n.id: 0.0 for n in topology.nodes}
    for (b, e), rate in demands.items():
        for n in topology.route(b, e):
            load[n] += rate
    return load


def arc_flows(topology: Topology, demands: Mapping[tuple[str, str], float]) -> dict[tuple[str, str], dict[tuple[str, str], float]]:
    """Per-flow traffic on each directed arc ``(m, n)`` along the routes."""
    _check_demands(topology, demands)
    flows: dict[tuple[str, str], dict[tuple[str, str], float]] = {}
    for (b, e), rate in demands.items():
        path = topology.route(b, e)
        for m, n in zip(path, path[1:]):
            flows.setdefault((m, n), {})[(b, e)] = flows.get((m, n), {}).get((b, e), 0.0) + rate
    return flows


def link_loads(topology: Topology, demands: Mapping[tuple[str, str], float]) -> dict[frozenset, float]:
    loads: dict[frozenset, float] = {}
    for (m, n), per_flow in arc_flows(topology, demands).items():
        key = frozenset((m, n))
        loads[key] = loads.get(key, 0.0) + sum(per_flow.values())
    return loads


def conservation_residuals(topology: Topology, demands: Mapping[tuple[str, str], float],
                           flows: Mapping[tuple[str, str], Mapping[tuple[str, str], float]] | None = None,
                           ) -> dict[tuple[tuple[str, str], str], float]:
    """Per (flow, node) deviation of net outflow from the required divergence.

    Required divergence is ``+rate`` at the flow origin, ``-rate`` at its
    destination and zero elsewhere.  An all-zero result means every flow is
    conserved.  ``flows`` defaults to the routed decomposition.
    """
    if flows is None:
        flows = arc_flows(topology, demands)
    out: dict[tuple[tuple[str, str], str], float] = {}
    for (b, e), rate in demands.items():
        for m in topology.nodes:
            net = 0.0
            for n in topology.adjacency[m.id]:
                net += flows.get((m.id, n), {}).get((b, e), 0.0)
                net -= flows.get((n, m.id), {}).get((b, e), 0.0)
            want = rate if m.id == b else -rate if m.id == e else 0.0
            out[((b, e), m.id)] = net - want
    return out
