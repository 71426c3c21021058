"""Full mixed-integer model of the placement problem in CPLEX LP format.

Variable naming (node and VM positions are indices into the scenario):

  x_r_s_b     VM s of request r hosted on processing node b (binary)
  y_l_b_e     link l runs from host b to host e (continuous, linearises x*x)
  t_b_e       traffic between processing nodes b != e
  f_b_e_m_n   part of t_b_e crossing the directed arc m -> n
  lam_n       traffic handled by node n
  on_n        transport node n switched on (binary)
  w_p         GFLOPS allocated to p
  cpu_p       CPUs switched on at p (integer)
  act_p       p hosts at least one VM (binary)
  lan_p       traffic entering or leaving p
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .model import CompiledScenario
from .workload import Scenario


@dataclass
class LpModel:
    objective: dict[str, float] = field(default_factory=dict)
    rows: list[tuple[str, str, dict[str, float], str, float]] = field(default_factory=list)
    bounds: dict[str, tuple[float, float | None]] = field(default_factory=dict)
    binaries: list[str] = field(default_factory=list)
    integers: list[str] = field(default_factory=list)
    continuous: list[str] = field(default_factory=list)
    header: list[str] = field(default_factory=list)
    _seen: dict[str, int] = field(default_factory=dict, repr=False)

    def add_row(self, kind: str, terms: dict[str, float], sense: str, rhs: float) -> None:
        n = self._seen.get(kind, 0)
        self._seen[kind] = n + 1
        name = f"{kind}_{n}"
        self.rows.append((name, kind, terms, sense, rhs))

    def row_counts(self) -> Counter:
        return Counter(kind for _, kind, _, _, _ in self.rows)

    def to_lp(self) -> str:
        out = [f"\\ {line}" for line in self.header]
        out.append("Minimize")
        out.extend(_expr("obj", self.objective))
        out.append("Subject To")
        for name, _, terms, sense, rhs in self.rows:
            out.extend(_expr(name, terms, f" {sense} {_num(rhs)}"))
        out.append("Bounds")
        for var, (lo, hi) in self.bounds.items():
            if hi is None:
                out.append(f" {var} >= {_num(lo)}")
            else:
                out.append(f" {_num(lo)} <= {var} <= {_num(hi)}")
        if self.integers:
            out.append("General")
            out.extend(_wrap(self.integers))
        if self.binaries:
            out.append("Binary")
            out.extend(_wrap(self.binaries))
        out.append("End")
        return "\n".join(out) + "\n"


def _num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _expr(name: str, terms: dict[str, float], tail: str = "", per_line: int = 6) -> list[str]:
    parts = []
    for var, coef in terms.items():
        if coef == 0:
            continue
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        parts.append(f"{sign} {var}" if mag == 1 else f"{sign} {_num(mag)} {var}")
    if not parts:
        parts = ["0 zero"]
    if parts[0].startswith("+ "):
        parts[0] = parts[0][2:]
    lines = []
    for i in range(0, len(parts), per_line):
        chunk = " ".join(parts[i:i + per_line])
        lines.append((f" {name}: " if i == 0 else "   ") + chunk)
    lines[-1] += tail
    return lines


def _wrap(names: list[str], per_line: int = 10) -> list[str]:
    return [" " + " ".join(names[i:i + per_line]) for i in range(0, len(names), per_line)]


def build_model(scenario: Scenario) -> LpModel:
    c = CompiledScenario.of(scenario)
    topo = c.topology
    m = LpModel()
    m.header = ["fogplace placement model"]
    m.header += [f"node {i}: {nid}" for i, nid in enumerate(c.node_ids)]

    procs = c.proc_nodes
    pairs = [(b, e) for b in procs for e in procs if b != e]
    neighbours = {n: [topo.index[v] for v in topo.adjacency[c.node_ids[n]]] for n in range(c.n_nodes)}

    # placement variables
    hosts: dict[int, list[int]] = {}
    x: dict[tuple[int, int], str] = {}
    for g, (r, s) in enumerate(c.vm_keys):
        hosts[g] = [c.pinned[g]] if c.is_input[g] else list(procs)
        for b in hosts[g]:
            name = f"x_{r}_{s}_{b}"
            x[(g, b)] = name
            m.binaries.append(name)

    for g, (r, s) in enumerate(c.vm_keys):
        terms = {x[(g, b)]: 1.0 for b in hosts[g]}
        m.add_row("input" if c.is_input[g] else "assign", terms, "=", 1)

    for b in procs:
        if c.k_limited[b]:
            terms = {x[(g, b)]: 1.0 for g in range(c.n_vms) if (g, b) in x and not c.is_input[g]}
            m.add_row("vmcap", terms, "<=", c.k)

    # inter-host traffic
    t_terms: dict[tuple[int, int], dict[str, float]] = {pair: {} for pair in pairs}
    for li, (ga, gb, rate) in enumerate(c.links):
        for b in hosts[ga]:
            for e in hosts[gb]:
                if b == e:
                    continue
                y = f"y_{li}_{b}_{e}"
                m.continuous.append(y)
                m.bounds[y] = (0, 1)
                m.add_row("link", {y: 1.0, x[(ga, b)]: -1.0, x[(gb, e)]: -1.0}, ">=", -1)
                t_terms[(b, e)][y] = -rate
    for (b, e), terms in t_terms.items():
        m.add_row("traffic", {f"t_{b}_{e}": 1.0, **terms}, "=", 0)

    # flow conservation per pair and node
    for b, e in pairs:
        for n in range(c.n_nodes):
            terms = {}
            for v in neighbours[n]:
                terms[f"f_{b}_{e}_{n}_{v}"] = terms.get(f"f_{b}_{e}_{n}_{v}", 0.0) + 1.0
                terms[f"f_{b}_{e}_{v}_{n}"] = terms.get(f"f_{b}_{e}_{v}_{n}", 0.0) - 1.0
            if n == b:
                terms[f"t_{b}_{e}"] = -1.0
            elif n == e:
                terms[f"t_{b}_{e}"] = 1.0
            m.add_row("flow", terms, "=", 0)

    # traffic handled per node: everything leaving it, plus what ends there
    for n in range(c.n_nodes):
        terms = {f"lam_{n}": 1.0}
        for b, e in pairs:
            for v in neighbours[n]:
                terms[f"f_{b}_{e}_{n}_{v}"] = -1.0
            if e == n:
                for v in neighbours[n]:
                    terms[f"f_{b}_{e}_{v}_{n}"] = -1.0
        m.add_row("load", terms, "=", 0)

    offered = sum(rate for _, _, rate in c.links)
    for n in range(c.n_nodes):
        if not c.has_net[n]:
            continue
        on = f"on_{n}"
        m.binaries.append(on)
        m.add_row("activate", {f"lam_{n}": 1.0, on: -offered}, "<=", 0)
        if n in c.active_sources:
            m.add_row("source_on", {on: 1.0}, "=", 1)
        if c.bitrate_cap[n] != float("inf"):
            m.add_row("bitrate", {f"lam_{n}": 1.0}, "<=", c.bitrate_cap[n])
    for key, cap in topo.link_capacity.items():
        a, b = sorted(topo.index[v] for v in key)
        terms = {}
        for (u, v) in ((a, b), (b, a)):
            for pb, pe in pairs:
                terms[f"f_{pb}_{pe}_{u}_{v}"] = 1.0
        m.add_row("linkcap", terms, "<=", cap)

    for p in procs:
        terms = {f"w_{p}": 1.0}
        for g in range(c.n_vms):
            if (g, p) in x and c.demand[g]:
                terms[x[(g, p)]] = -c.demand[g]
        m.add_row("workload", terms, "=", 0)
        if c.cpu_cap[p] != float("inf"):
            m.add_row("cpus", {f"w_{p}": 1.0, f"cpu_{p}": -c.cpu_cap[p]}, "<=", 0)
        m.integers.append(f"cpu_{p}")
        m.bounds[f"cpu_{p}"] = (0, c.max_cpus[p])
        act = f"act_{p}"
        m.binaries.append(act)
        for g in range(c.n_vms):
            if (g, p) in x:
                m.add_row("hosts", {x[(g, p)]: 1.0, act: -1.0}, "<=", 0)
        terms = {f"lan_{p}": 1.0}
        for e in procs:
            if e != p:
                terms[f"t_{p}_{e}"] = -1.0
                terms[f"t_{e}_{p}"] = -1.0
        m.add_row("lan", terms, "=", 0)

    obj: dict[str, float] = {}
    for n in range(c.n_nodes):
        if c.has_net[n]:
            obj[f"lam_{n}"] = c.eps[n]
            obj[f"on_{n}"] = c.net_idle[n]
    for p in procs:
        obj[f"w_{p}"] = c.E[p]
        obj[f"cpu_{p}"] = c.cpu_idle[p]
        obj[f"lan_{p}"] = c.EL[p]
        obj[f"act_{p}"] = c.lan_idle[p]
    m.objective = obj
    return m


def export_lp(scenario: Scenario) -> str:
    """The complete placement model as CPLEX-LP text."""
    return build_model(scenario).to_lp()
