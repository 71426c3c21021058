"""Fixtures shared by several test modules."""
from dataclasses import replace

from fogplace.topology import Topology
from fogplace.workload import Scenario, chain_request

from conftest import tiny_topology


def infeasible_scenario() -> Scenario:
    """Only the source can compute and it has a single CPU, too small for the request."""
    topo = tiny_topology(1, 2)
    nodes = []
    for n in topo.nodes:
        if n.processor is not None:
            n = replace(n, processor=replace(n.processor, max_cpus=1 if n.is_source else 0))
        nodes.append(n)
    topo = Topology(nodes, topo.links, unique_paths=True)
    return Scenario(topo, [chain_request(0, [9.0, 9.0], 0.1, "iot-1-1")], 1)
