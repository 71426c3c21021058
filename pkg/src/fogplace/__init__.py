"""Energy-minimising placement of layered ML workloads over an IoT/fog/cloud network."""
from .topology import (
    NetworkProfile,
    Node,
    NodeTier,
    ProcessorProfile,
    ReferenceConfig,
    Topology,
    TopologyError,
    aggregate_node_traffic,
    build_reference_topology,
)
from .workload import (
    Scenario,
    ScenarioError,
    VirtualLink,
    VirtualMachine,
    VirtualRequest,
    generate_requests,
    load_scenario,
    save_scenario,
    total_demand,
)
from .placement import (
    DerivedState,
    InfeasiblePlacementError,
    Placement,
    Violation,
    check_constraints,
    derive_state,
    traffic_from_placement,
)
from .power import PowerBreakdown, evaluate, network_power, processing_power
from .exact import Budget, SolveResult, Status, branch_and_bound, brute_force
from .heuristic import greedy, greedy_local, local_search
from .lpexport import export_lp
from .experiments import SweepRecord, SweepSpec, compute_savings, emit_report, reference_scenario, run_sweep

__version__ = "0.1.0"

__all__ = [
    "NetworkProfile", "Node", "NodeTier", "ProcessorProfile", "ReferenceConfig", "Topology",
    "TopologyError", "aggregate_node_traffic", "build_reference_topology",
    "Scenario", "ScenarioError", "VirtualLink", "VirtualMachine", "VirtualRequest",
    "generate_requests", "load_scenario", "save_scenario", "total_demand",
    "DerivedState", "InfeasiblePlacementError", "Placement", "Violation", "check_constraints",
    "derive_state", "traffic_from_placement",
    "PowerBreakdown", "evaluate", "network_power", "processing_power",
    "Budget", "SolveResult", "Status", "branch_and_bound", "brute_force",
    "greedy", "greedy_local", "local_search", "export_lp",
    "SweepRecord", "SweepSpec", "compute_savings", "emit_report", "reference_scenario", "run_sweep",
]
