import pytest

from fogplace.placement import (
    ASSIGNMENT,
    BITRATE_CAPACITY,
    CPU_CAPACITY,
    INPUT_PINNING,
    IOT_VM_LIMIT,
    CapacityViolationError,
    Placement,
    check_constraints,
    derive_state,
    placement_from_rows,
    traffic_from_placement,
)
from fogplace.topology import Topology
from fogplace.workload import Scenario, VirtualLink, VirtualMachine, VirtualRequest, chain_request

from conftest import tiny_topology

SRC = "iot-1-1"


def kinds(sc, pl):
    return sorted(v.kind for v in check_constraints(sc, pl))


def test_colocated_request_has_no_traffic(one_zone):
    sc = Scenario(one_zone, [chain_request(0, [2.0, 3.0], 0.1, SRC)], 3)
    pl = Placement({(0, 0): SRC, (0, 1): SRC, (0, 2): SRC})
    assert traffic_from_placement(sc, pl) == {}
    st = derive_state(sc, pl)
    assert st.omega_p[SRC] == 5.0
    assert not any(st.beta_n.values())


def test_chain_split_to_afn(one_zone):
    sc = Scenario(one_zone, [chain_request(0, [2.0, 3.0], 0.1, SRC)], 1)
    pl = Placement({(0, 0): SRC, (0, 1): "afn", (0, 2): "afn"})
    assert traffic_from_placement(sc, pl) == {(SRC, "afn"): 0.1}


def test_parallel_links_add(one_zone):
    vms = (VirtualMachine(0, 0, 0.0, True), VirtualMachine(0, 1, 1.0))
    req = VirtualRequest(0, vms, (VirtualLink(0, 1, 0.1), VirtualLink(0, 1, 0.25)), SRC)
    sc = Scenario(one_zone, [req], 1)
    tm = traffic_from_placement(sc, Placement({(0, 0): SRC, (0, 1): "cloud"}))
    assert tm == {(SRC, "cloud"): pytest.approx(0.35)}


def test_single_iot_vm_state(one_zone):
    sc = Scenario(one_zone, [chain_request(0, [10.0], 0.1, SRC)], 1)
    st = derive_state(sc, Placement({(0, 0): SRC, (0, 1): "iot-1-2"}))
    assert st.omega_p["iot-1-2"] == 10.0
    assert st.n_servers["iot-1-2"] == 1
    assert st.phi_p["iot-1-2"] == 1
    assert st.theta_p["iot-1-2"] == pytest.approx(0.1)
    assert st.theta_p[SRC] == pytest.approx(0.1)
    assert st.beta_n["onu-1"] == 1 and st.lambda_n["onu-1"] == pytest.approx(0.1)
    assert st.beta_n["olt"] == 0


def test_over_capacity_is_reported_not_clamped():
    topo = tiny_topology(1, 2, iot_max_cpus=1)
    sc = Scenario(topo, [chain_request(0, [20.0], 0.1, SRC)], 1)
    pl = Placement({(0, 0): SRC, (0, 1): "iot-1-2"})
    with pytest.raises(CapacityViolationError):
        derive_state(sc, pl)
    assert derive_state(sc, pl, strict=False).n_servers["iot-1-2"] == 2
    assert kinds(sc, pl) == [CPU_CAPACITY]


def test_input_only_source(one_zone):
    sc = Scenario(one_zone, [chain_request(0, [], 0.1, SRC)], 1)
    st = derive_state(sc, Placement({(0, 0): SRC}))
    assert (st.omega_p[SRC], st.phi_p[SRC], st.n_servers[SRC]) == (0.0, 1, 0)


def test_unassigned_vm(one_zone):
    sc = Scenario(one_zone, [chain_request(0, [1.0, 1.0], 0.1, SRC)], 1)
    assert kinds(sc, Placement({(0, 0): SRC, (0, 1): "afn"})) == [ASSIGNMENT]


def test_k_limit_on_non_source_iot(one_zone):
    sc = Scenario(one_zone, [chain_request(0, [1.0, 1.0], 0.1, SRC)], 1)
    pl = Placement({(0, 0): SRC, (0, 1): "iot-1-2", (0, 2): "iot-1-2"})
    assert kinds(sc, pl) == [IOT_VM_LIMIT]
    assert kinds(sc.with_(k=2), pl) == []


def test_source_exempt_unless_capped(one_zone):
    sc = Scenario(one_zone, [chain_request(0, [1.0, 1.0, 1.0], 0.1, SRC)], 1)
    pl = Placement({(0, s): SRC for s in range(4)})
    assert kinds(sc, pl) == []
    assert kinds(sc.with_(cap_source=True), pl) == [IOT_VM_LIMIT]
    # the input VM itself does not count towards the cap
    assert kinds(sc.with_(cap_source=True, k=3), pl) == []


def test_input_pinning(one_zone):
    sc = Scenario(one_zone, [chain_request(0, [1.0], 0.1, SRC)], 1)
    assert kinds(sc, Placement({(0, 0): "afn", (0, 1): "afn"})) == [INPUT_PINNING]


def test_non_processing_and_unknown_hosts(one_zone):
    sc = Scenario(one_zone, [chain_request(0, [1.0], 0.1, SRC)], 1)
    assert kinds(sc, Placement({(0, 0): SRC, (0, 1): "olt"})) == [ASSIGNMENT]
    assert ASSIGNMENT in kinds(sc, Placement({(0, 0): SRC, (0, 1): "mars", (7, 7): "afn"}))


def test_bitrate_capacity(one_zone):
    caps = {("iot-1-1", "onu-1"): 0.05}
    topo = Topology(one_zone.nodes, one_zone.links, caps, unique_paths=True)
    sc = Scenario(topo, [chain_request(0, [1.0], 0.1, SRC)], 1)
    assert kinds(sc, Placement({(0, 0): SRC, (0, 1): "afn"})) == [BITRATE_CAPACITY]
    assert kinds(sc, Placement({(0, 0): SRC, (0, 1): SRC})) == []


def test_placement_serialization():
    pl = placement_from_rows([(1, 0, "a"), (0, 1, "b"), (0, 0, "a")])
    assert pl.rows() == [(0, 0, "a"), (0, 1, "b"), (1, 0, "a")]
    assert Placement.from_dict(pl.to_dict()) == pl
    assert pl.to_csv().splitlines() == ["request,vm,node", "0,0,a", "0,1,b", "1,0,a"]
