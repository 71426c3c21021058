"""Shared builders for small scenarios."""
from __future__ import annotations

import random

import pytest

from fogplace.topology import ReferenceConfig, build_reference_topology, iot_id
from fogplace.workload import Scenario, VirtualLink, VirtualMachine, VirtualRequest, chain_request

DELTAS = (0.03, 0.06, 0.10, 0.5, 1.0)


def tiny_topology(zones=1, iot=1, **kw):
    return build_reference_topology(ReferenceConfig(zones=zones, iot_per_zone=iot, **kw))


def single_vm_scenario(demand=5.0, k=1, delta=1.0, rate=0.1, **kw):
    topo = tiny_topology(**kw)
    req = chain_request(0, [demand], rate, iot_id(1, 1))
    return Scenario(topo, [req], k, delta)


def random_request(rng: random.Random, rid: int, source: str, max_vms=3) -> VirtualRequest:
    n = rng.randint(1, max_vms)
    vms = [VirtualMachine(rid, 0, 0.0, True)]
    vms += [VirtualMachine(rid, i, round(rng.uniform(0.6, 10.0), 2)) for i in range(1, n)]
    links = []
    for i in range(1, n):
        # random tree over the VMs, occasionally with an extra parallel link
        j = rng.randrange(i)
        rate = rng.choice([0.1, 0.1, 0.5, 1.0, 0.0])
        a, b = (j, i) if rng.random() < 0.8 else (i, j)
        links.append(VirtualLink(a, b, rate))
    if n > 1 and rng.random() < 0.2:
        links.append(VirtualLink(0, n - 1, 0.2))
    return VirtualRequest(rid, tuple(vms), tuple(links), source)


def random_small_scenario(seed: int) -> Scenario:
    """At most 2 requests of at most 3 VMs on at most 8 processing nodes."""
    rng = random.Random(seed)
    zones = rng.randint(1, 2)
    sizes = [rng.randint(1, 5 // zones) for _ in range(zones)]
    lan = rng.random() < 0.3
    cfg = ReferenceConfig(
        zones=zones,
        iot_per_zone=sizes,
        source=iot_id(rng.randint(1, zones), 1),
        iot_max_cpus=rng.randint(1, 3),
        afn_max_cpus=rng.randint(1, 3),
        mfn_max_cpus=rng.randint(1, 4),
        lan_energy_per_gbps=0.5 if lan else 0.0,
        lan_idle_power=20.0 if lan else 0.0,
    )
    topo = build_reference_topology(cfg)
    source = topo.sources[0].id
    reqs = [random_request(rng, r, source) for r in range(rng.randint(1, 2))]
    return Scenario(topo, reqs, rng.randint(1, 3), rng.choice(DELTAS), cap_source=rng.random() < 0.2)


@pytest.fixture
def one_zone():
    return tiny_topology(zones=1, iot=2)
