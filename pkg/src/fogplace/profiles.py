"""Device datasheet values for the reference cloud-fog network.

Rows are kept in their published form (max, idle, capacity, efficiency) so
that the derived profiles can be audited against the raw numbers.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class CpuRow:
    name: str
    max_w: float
    idle_w: float
    gflops: float
    efficiency: float  # W/GFLOPS as listed

    def derived_efficiency(self) -> float:
        return (self.max_w - self.idle_w) / self.gflops


@dataclass(frozen=True)
class NetRow:
    name: str
    max_w: float
    idle_w: float
    gbps: float
    efficiency: float  # W/(Gb/s) as listed

    def derived_efficiency(self) -> float:
        return (self.max_w - self.idle_w) / self.gbps


IOT_CPU = CpuRow("IoT CPU", 7.3, 2.56, 13.5, 0.35)
AFN_CPU = CpuRow("AFN CPU", 37.2, 13.8, 34.5, 0.67)
MFN_CPU = CpuRow("MFN CPU", 37.2, 13.8, 34.5, 0.67)
CLOUD_CPU = CpuRow("Cloud CPU", 298.0, 58.7, 428.0, 0.55)

CPU_ROWS = (IOT_CPU, AFN_CPU, MFN_CPU, CLOUD_CPU)

ONU_AP = NetRow("ONU Wi-Fi AP", 15.0, 9.0, 10.0, 0.6)
OLT = NetRow("OLT", 1940.0, 60.0, 8600.0, 0.22)
METRO_ROUTER_PORT = NetRow("Metro Router Port", 30.0, 27.0, 40.0, 0.08)
METRO_SWITCH = NetRow("Metro Switch", 470.0, 423.0, 600.0, 0.08)
IP_WDM_NODE = NetRow("IP/WDM Node", 878.0, 790.0, 40.0, 0.14)

NET_ROWS = (ONU_AP, OLT, METRO_ROUTER_PORT, METRO_SWITCH, IP_WDM_NODE)

# Fractions of peak power used when a datasheet lacks an idle figure.
CORE_IDLE_FRACTION = 0.9
ACCESS_IDLE_FRACTION = 0.6

DELTA_VALUES = (0.03, 0.06, 0.10)


def idle_or_fraction(row: NetRow | CpuRow, fraction: float) -> float:
    """Listed idle power, or ``fraction`` of peak when the listing has none."""
    if row.idle_w > 0:
        return row.idle_w
    return fraction * row.max_w
