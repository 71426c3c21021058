import pytest

from fogplace import profiles
from fogplace.placement import DerivedState, InfeasiblePlacementError, Placement
from fogplace.power import evaluate, network_power, processing_power
from fogplace.topology import NodeTier, ReferenceConfig, TopologyError, build_reference_topology
from fogplace.workload import Scenario, chain_request

from conftest import tiny_topology

SRC = "iot-1-1"


def empty_state(**kw):
    fields = dict(traffic={}, lambda_n={}, beta_n={}, omega_p={}, theta_p={}, n_servers={}, phi_p={})
    fields.update(kw)
    return DerivedState(**fields)


def test_zero_state(one_zone):
    assert network_power(one_zone, empty_state()) == (0.0, 0.0)
    assert processing_power(one_zone, empty_state()) == (0.0, 0.0, 0.0, 0.0)


def test_onu_hand_value(one_zone):
    st = empty_state(lambda_n={"onu-1": 1.0}, beta_n={"onu-1": 1})
    assert network_power(one_zone, st) == pytest.approx((0.6, 9.0), rel=1e-9)


def test_olt_idle_share():
    topo = tiny_topology(1, 1, delta=0.03)
    _, idle = network_power(topo, empty_state(beta_n={"olt": 1}))
    assert idle == pytest.approx(1.8, rel=1e-9)


def test_iot_and_cloud_processing(one_zone):
    st = empty_state(omega_p={SRC: 10.0}, n_servers={SRC: 1}, phi_p={SRC: 1})
    assert sum(processing_power(one_zone, st)) == pytest.approx(6.06, rel=1e-9)
    st = empty_state(omega_p={"cloud": 10.0}, n_servers={"cloud": 1}, phi_p={"cloud": 1})
    assert sum(processing_power(one_zone, st)) == pytest.approx(64.2, rel=1e-9)


def test_missing_profiles_raise(one_zone):
    with pytest.raises(TopologyError):
        network_power(one_zone, empty_state(beta_n={"afn": 1}))
    with pytest.raises(TopologyError):
        processing_power(one_zone, empty_state(omega_p={"olt": 1.0}))


def test_colocated_on_source():
    sc = Scenario(tiny_topology(1, 1), [chain_request(0, [5.0], 0.1, SRC)], 1, 1.0)
    bd = evaluate(sc, Placement({(0, 0): SRC, (0, 1): SRC}))
    assert bd.total == pytest.approx(0.35 * 5 + 2.56, rel=1e-9)
    assert bd.network == 0.0
    assert bd.tier_workload_share[NodeTier.IOT_DEVICE] == 1.0


def test_split_to_afn_hand_value():
    # input at the source, one 10 GFLOPS VM at the access fog node, 0.1 Gb/s link
    sc = Scenario(tiny_topology(1, 1), [chain_request(0, [10.0], 0.1, SRC)], 1, 0.03)
    bd = evaluate(sc, Placement({(0, 0): SRC, (0, 1): "afn"}))
    assert bd.net_proportional == pytest.approx(0.1 * 0.6 + 0.1 * 0.22, rel=1e-9)
    assert bd.net_idle == pytest.approx(9.0 + 60 * 0.03, rel=1e-9)
    assert bd.proc_proportional == pytest.approx(6.7, rel=1e-9)
    assert bd.proc_idle == pytest.approx(13.8, rel=1e-9)
    assert bd.total == pytest.approx(0.082 + 10.8 + 6.7 + 13.8, rel=1e-9)
    assert bd.tier_workload_share[NodeTier.ACCESS_FOG] == 1.0


def test_lan_terms_use_host_delta():
    topo = build_reference_topology(ReferenceConfig(zones=1, iot_per_zone=1,
                                                    lan_energy_per_gbps=2.0, lan_idle_power=100.0))
    sc = Scenario(topo, [chain_request(0, [10.0], 0.5, SRC)], 1, 0.06)
    bd = evaluate(sc, Placement({(0, 0): SRC, (0, 1): "cloud"}))
    # theta is 0.5 at both ends; the source LAN is charged in full, the cloud LAN at delta
    assert bd.lan_proportional == pytest.approx(2.0 * 0.5 * 2, rel=1e-9)
    assert bd.lan_idle == pytest.approx(100.0 + 100.0 * 0.06, rel=1e-9)


def test_infeasible_raises(one_zone):
    sc = Scenario(one_zone, [chain_request(0, [5.0], 0.1, SRC)], 1)
    with pytest.raises(InfeasiblePlacementError):
        evaluate(sc, Placement({(0, 0): "afn", (0, 1): "afn"}))


def test_table_efficiencies():
    for row in profiles.CPU_ROWS:
        assert abs(row.derived_efficiency() - row.efficiency) <= 0.01, row.name
    assert abs(profiles.IP_WDM_NODE.derived_efficiency() - profiles.IP_WDM_NODE.efficiency) > 0.01
