"""Greenfield capacity-expansion model for a multi-node power network.

Builds the planning LP: per-node hourly energy balance, variable-renewable
dispatch limited by availability, open-cycle gas backup with a CO2 budget,
two storage technologies with cyclic state of charge, and a transport flow
model on the links (net flows bounded by line capacity; no voltage-law
cycle constraints).  Costs follow the bundled 2030 technology table:
capital is annualized with the capital-recovery factor and added to fixed
O&M and marginal dispatch cost.

Units: capacities MW, energy MWh, specific investment currency/kW
(currency/kWh for the storage energy component, currency/MW/km for lines);
the builder converts everything to currency/MW internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from nearopt import lp as lpmod
from nearopt.maa import Projection

OCGT = "ocgt"
TRANSMISSION = "transmission"

#: technologies whose dispatch is limited by an availability series
DEFAULT_STORAGE_HOURS = {"hydrogen": 168.0, "battery": 6.0}
DEFAULT_EFFICIENCIES = {"hydrogen": (0.75, 0.58), "battery": (0.90, 0.90)}


def annualize(investment: float, rate: float, lifetime: float) -> float:
    """Capital-recovery annuity: investment * rate / (1 - (1+rate)^-n)."""
    if rate <= 0:
        raise ValueError("discount rate must be positive")
    if lifetime < 1:
        raise ValueError("lifetime must be at least one year")
    return investment * rate / (1.0 - (1.0 + rate) ** (-lifetime))


@dataclass(frozen=True)
class TechnologyCost:
    """Cost record for one technology (2030 predictions in the bundle).

    `investment` is currency/kW of power capacity, except for transmission
    where it is currency/MW/km.  Storage carries an extra energy component
    in currency/kWh.  Transmission O&M is a fraction of overnight capital
    per year (`fixed_om_is_fraction`); for everything else `fixed_om` is
    currency/kW/yr.  `per_line_investment` is the per-line adder in
    currency/MW covering converter stations.
    """

    name: str
    investment: float
    fixed_om: float
    marginal: float
    lifetime: float
    co2_intensity: float = 0.0
    energy_investment: float = 0.0
    fixed_om_is_fraction: bool = False
    per_line_investment: float = 0.0

    def __post_init__(self):
        for label in ("investment", "fixed_om", "marginal", "energy_investment", "per_line_investment"):
            if getattr(self, label) < 0:
                raise ValueError(f"{self.name}: {label} must be nonnegative")
        if self.lifetime < 1:
            raise ValueError(f"{self.name}: lifetime must be at least one year")
        if self.co2_intensity != 0.0 and self.name != OCGT:
            raise ValueError(f"{self.name}: only {OCGT} may emit CO2 in this model")


def default_costs() -> Dict[str, TechnologyCost]:
    """Bundled 2030 technology cost table (7% discount rate convention)."""
    return {
        "onshore_wind": TechnologyCost("onshore_wind", 1035.0, 12.0, 0.0, 30),
        "offshore_wind": TechnologyCost("offshore_wind", 1934.0, 36.0, 0.0, 30),
        "solar": TechnologyCost("solar", 254.0, 7.0, 0.0, 30),
        OCGT: TechnologyCost(OCGT, 435.0, 7.0, 58.4, 25, co2_intensity=0.19),
        "hydrogen": TechnologyCost("hydrogen", 555.0, 9.2, 0.0, 20, energy_investment=8.4),
        "battery": TechnologyCost("battery", 310.0, 9.3, 0.0, 20, energy_investment=144.0),
        TRANSMISSION: TechnologyCost(
            TRANSMISSION,
            400.0,
            0.02,
            0.0,
            40,
            fixed_om_is_fraction=True,
            per_line_investment=150_000.0,
        ),
    }


@dataclass(frozen=True)
class Node:
    """One network node: demand, renewable availability, limits, economy."""

    name: str
    demand: np.ndarray
    availability: Dict[str, np.ndarray] = field(default_factory=dict)
    techs: Tuple[str, ...] = ("onshore_wind", "offshore_wind", "solar", OCGT)
    storage: Tuple[str, ...] = ("hydrogen", "battery")
    gdp: float = 0.0
    potential: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "demand", np.asarray(self.demand, float))
        self.demand.flags.writeable = False


@dataclass(frozen=True)
class Link:
    node_a: str
    node_b: str
    length_km: float

    @property
    def name(self) -> str:
        return f"{self.node_a}-{self.node_b}"


@dataclass(frozen=True)
class NetworkSpec:
    """Immutable model instance; horizon T, nodes, links, global settings."""

    nodes: Tuple[Node, ...]
    links: Tuple[Link, ...]
    horizon: int
    co2_cap: Optional[float] = None
    storage_hours: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_STORAGE_HOURS))
    efficiencies: Dict[str, Tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_EFFICIENCIES)
    )
    discount_rate: float = 0.07

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least one hour")
        if self.co2_cap is not None and self.co2_cap < 0:
            raise ValueError("CO2 cap must be nonnegative")
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise ValueError("node names must be unique")
        for node in self.nodes:
            if node.demand.shape[0] != self.horizon:
                raise ValueError(f"{node.name}: demand series length != horizon")
            if np.any(node.demand < 0) or not np.all(np.isfinite(node.demand)):
                raise ValueError(f"{node.name}: demand must be finite and nonnegative")
            for tech, series in node.availability.items():
                arr = np.asarray(series, float)
                if arr.shape[0] != self.horizon:
                    raise ValueError(f"{node.name}/{tech}: availability length != horizon")
                if np.any(arr < 0) or np.any(arr > 1):
                    raise ValueError(f"{node.name}/{tech}: availability outside [0, 1]")
            for sto in node.storage:
                if sto not in self.storage_hours or self.storage_hours[sto] <= 0:
                    raise ValueError(f"{node.name}/{sto}: missing or nonpositive storage hours")
                eta_c, eta_d = self.efficiencies[sto]
                if eta_c <= 0 or eta_d <= 0:
                    raise ValueError(f"{sto}: efficiencies must be positive")
        for link in self.links:
            if link.node_a not in names or link.node_b not in names:
                raise ValueError(f"link {link.name} references a missing node")
            if link.length_km <= 0:
                raise ValueError(f"link {link.name}: length must be positive")

    def node(self, name: str) -> Node:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def with_co2_cap(self, cap: Optional[float]) -> "NetworkSpec":
        return NetworkSpec(
            nodes=self.nodes,
            links=self.links,
            horizon=self.horizon,
            co2_cap=cap,
            storage_hours=self.storage_hours,
            efficiencies=self.efficiencies,
            discount_rate=self.discount_rate,
        )


@dataclass(frozen=True)
class VarKey:
    """Meaning of one LP column."""

    node: str  # node name, or link name for line variables
    tech: str
    kind: str  # capacity | dispatch | charge | discharge | soc | line_capacity | flow
    hour: Optional[int] = None


class VariableLayout:
    """Bijective registry between LP columns and their meaning."""

    def __init__(self):
        self.keys: List[VarKey] = []
        self._index: Dict[VarKey, int] = {}

    def add(self, key: VarKey) -> int:
        if key in self._index:
            raise ValueError(f"duplicate variable {key}")
        self._index[key] = len(self.keys)
        self.keys.append(key)
        return self._index[key]

    def __len__(self) -> int:
        return len(self.keys)

    def index(self, key: VarKey) -> int:
        return self._index[key]

    def get(self, node: str, tech: str, kind: str, hour: Optional[int] = None) -> int:
        return self._index[VarKey(node, tech, kind, hour)]

    def indices(self, kind: Optional[str] = None, tech: Optional[str] = None,
                node: Optional[str] = None) -> List[int]:
        out = []
        for i, k in enumerate(self.keys):
            if kind is not None and k.kind != kind:
                continue
            if tech is not None and k.tech != tech:
                continue
            if node is not None and k.node != node:
                continue
            out.append(i)
        return out

    def names(self) -> List[str]:
        out = []
        for k in self.keys:
            label = f"{k.kind}:{k.node}:{k.tech}"
            if k.hour is not None:
                label += f":{k.hour}"
            out.append(label)
        return out


class _RowBag:
    """Sparse triplet accumulator for one constraint block."""

    def __init__(self):
        self.rows: List[int] = []
        self.cols: List[int] = []
        self.vals: List[float] = []
        self.rhs: List[float] = []

    def new_row(self, rhs: float) -> int:
        self.rhs.append(float(rhs))
        return len(self.rhs) - 1

    def put(self, row: int, col: int, val: float) -> None:
        self.rows.append(row)
        self.cols.append(col)
        self.vals.append(float(val))

    def matrix(self, n_cols: int) -> Tuple[sp.csr_matrix, np.ndarray]:
        mat = sp.coo_matrix(
            (self.vals, (self.rows, self.cols)), shape=(len(self.rhs), n_cols)
        ).tocsr()
        return mat, np.asarray(self.rhs, float)


def build_lp(spec: NetworkSpec, costs: Dict[str, TechnologyCost]) -> Tuple[lpmod.LinearProgram, VariableLayout]:
    """Assemble the planning LP and its column registry."""
    T = spec.horizon
    layout = VariableLayout()

    for node in spec.nodes:
        for tech in node.techs:
            if tech not in costs:
                raise ValueError(f"no cost record for technology {tech!r}")
            layout.add(VarKey(node.name, tech, "capacity"))
        for sto in node.storage:
            if sto not in costs:
                raise ValueError(f"no cost record for storage {sto!r}")
            layout.add(VarKey(node.name, sto, "capacity"))
    if spec.links and TRANSMISSION not in costs:
        raise ValueError("no cost record for transmission lines")
    for link in spec.links:
        layout.add(VarKey(link.name, TRANSMISSION, "line_capacity"))
    for node in spec.nodes:
        for tech in node.techs:
            for t in range(T):
                layout.add(VarKey(node.name, tech, "dispatch", t))
        for sto in node.storage:
            for kind in ("charge", "discharge", "soc"):
                for t in range(T):
                    layout.add(VarKey(node.name, sto, kind, t))
    for link in spec.links:
        for t in range(T):
            layout.add(VarKey(link.name, TRANSMISSION, "flow", t))

    n = len(layout)
    c = np.zeros(n)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)

    rate = spec.discount_rate
    for node in spec.nodes:
        for tech in node.techs:
            rec = costs[tech]
            cap_ix = layout.get(node.name, tech, "capacity")
            c[cap_ix] = annualize(rec.investment * 1e3, rate, rec.lifetime) + rec.fixed_om * 1e3
            if tech in node.potential:
                hi[cap_ix] = float(node.potential[tech])
            if rec.marginal:
                for t in range(T):
                    c[layout.get(node.name, tech, "dispatch", t)] = rec.marginal
        for sto in node.storage:
            rec = costs[sto]
            hours = spec.storage_hours[sto]
            capital = (rec.investment + rec.energy_investment * hours) * 1e3
            cap_ix = layout.get(node.name, sto, "capacity")
            c[cap_ix] = annualize(capital, rate, rec.lifetime) + rec.fixed_om * 1e3
            if sto in node.potential:
                hi[cap_ix] = float(node.potential[sto])
    for link in spec.links:
        rec = costs[TRANSMISSION]
        capital = rec.investment * link.length_km + rec.per_line_investment
        om = rec.fixed_om * capital if rec.fixed_om_is_fraction else rec.fixed_om * 1e3
        ix = layout.get(link.name, TRANSMISSION, "line_capacity")
        c[ix] = annualize(capital, rate, rec.lifetime) + om
    for link in spec.links:
        for t in range(T):
            lo[layout.get(link.name, TRANSMISSION, "flow", t)] = -np.inf

    eq = _RowBag()
    ub = _RowBag()

    # hourly energy balance per node
    for node in spec.nodes:
        for t in range(T):
            row = eq.new_row(float(node.demand[t]))
            for tech in node.techs:
                eq.put(row, layout.get(node.name, tech, "dispatch", t), 1.0)
            for sto in node.storage:
                eq.put(row, layout.get(node.name, sto, "discharge", t), 1.0)
                eq.put(row, layout.get(node.name, sto, "charge", t), -1.0)
    for link in spec.links:
        for t in range(T):
            col = layout.get(link.name, TRANSMISSION, "flow", t)
            row_a = _balance_row(spec, link.node_a, t)
            row_b = _balance_row(spec, link.node_b, t)
            eq.put(row_a, col, -1.0)  # positive flow exports from a
            eq.put(row_b, col, 1.0)

    # dispatch limited by availability (or plain capacity for firm plants)
    for node in spec.nodes:
        for tech in node.techs:
            cap_ix = layout.get(node.name, tech, "capacity")
            avail = node.availability.get(tech)
            for t in range(T):
                row = ub.new_row(0.0)
                ub.put(row, layout.get(node.name, tech, "dispatch", t), 1.0)
                ub.put(row, cap_ix, -(float(avail[t]) if avail is not None else 1.0))

    # storage: power limits, energy limit, cyclic state of charge
    for node in spec.nodes:
        for sto in node.storage:
            cap_ix = layout.get(node.name, sto, "capacity")
            hours = spec.storage_hours[sto]
            eta_c, eta_d = spec.efficiencies[sto]
            for t in range(T):
                for kind in ("charge", "discharge"):
                    row = ub.new_row(0.0)
                    ub.put(row, layout.get(node.name, sto, kind, t), 1.0)
                    ub.put(row, cap_ix, -1.0)
                row = ub.new_row(0.0)
                ub.put(row, layout.get(node.name, sto, "soc", t), 1.0)
                ub.put(row, cap_ix, -hours)
                row = eq.new_row(0.0)
                prev = (t - 1) % T  # cyclic boundary: soc(0) wraps to soc(T-1)
                eq.put(row, layout.get(node.name, sto, "soc", t), 1.0)
                eq.put(row, layout.get(node.name, sto, "soc", prev), -1.0)
                eq.put(row, layout.get(node.name, sto, "charge", t), -eta_c)
                eq.put(row, layout.get(node.name, sto, "discharge", t), 1.0 / eta_d)

    # |flow| bounded by line capacity
    for link in spec.links:
        cap_ix = layout.get(link.name, TRANSMISSION, "line_capacity")
        for t in range(T):
            col = layout.get(link.name, TRANSMISSION, "flow", t)
            row = ub.new_row(0.0)
            ub.put(row, col, 1.0)
            ub.put(row, cap_ix, -1.0)
            row = ub.new_row(0.0)
            ub.put(row, col, -1.0)
            ub.put(row, cap_ix, -1.0)

    # global CO2 budget over all emitting dispatch
    if spec.co2_cap is not None:
        row = ub.new_row(float(spec.co2_cap))
        for node in spec.nodes:
            for tech in node.techs:
                intensity = costs[tech].co2_intensity
                if intensity:
                    for t in range(T):
                        ub.put(row, layout.get(node.name, tech, "dispatch", t), intensity)

    a_eq, b_eq = eq.matrix(n)
    a_ub, d_ub = ub.matrix(n)
    program = lpmod.LinearProgram(
        c=c,
        a_eq=a_eq,
        b_eq=b_eq,
        a_ub=a_ub,
        d_ub=d_ub,
        lo=lo,
        hi=hi,
        names=tuple(layout.names()),
    )
    return program, layout


def _balance_row(spec: NetworkSpec, node_name: str, t: int) -> int:
    # balance rows are laid out first, node-major then hour
    for i, node in enumerate(spec.nodes):
        if node.name == node_name:
            return i * spec.horizon + t
    raise KeyError(node_name)


def emissions(x: np.ndarray, layout: VariableLayout, costs: Dict[str, TechnologyCost]) -> float:
    """Total tCO2 of a solution (emitting dispatch times intensity)."""
    total = 0.0
    for tech, rec in costs.items():
        if rec.co2_intensity:
            ix = layout.indices(kind="dispatch", tech=tech)
            if ix:
                total += rec.co2_intensity * float(np.sum(x[ix]))
    return total


def co2_baseline(
    spec: NetworkSpec,
    costs: Dict[str, TechnologyCost],
    backend: str = "auto",
    override: Optional[float] = None,
) -> float:
    """Reference emissions for reduction fractions: the unconstrained
    cost optimum's emissions, unless an explicit override is supplied."""
    if override is not None:
        return float(override)
    program, layout = build_lp(spec.with_co2_cap(None), costs)
    sol = lpmod.solve(program, backend=backend)
    if sol.status != lpmod.OPTIMAL:
        raise RuntimeError(f"unconstrained baseline solve is {sol.status}")
    return emissions(sol.x, layout, costs)


def apply_co2_reduction(
    spec: NetworkSpec,
    reduction: float,
    baseline: float,
) -> NetworkSpec:
    """Spec with an absolute cap at (1 - reduction) of the baseline."""
    if not 0.0 <= reduction <= 1.0:
        raise ValueError("reduction fraction must lie in [0, 1]")
    return spec.with_co2_cap(baseline * (1.0 - reduction))


# -- solution accessors -------------------------------------------------------


def capacities(x: np.ndarray, layout: VariableLayout) -> Dict[Tuple[str, str], float]:
    """(node, tech) -> MW for capacity and line-capacity columns."""
    out = {}
    for i, key in enumerate(layout.keys):
        if key.kind in ("capacity", "line_capacity"):
            out[(key.node, key.tech)] = float(x[i])
    return out


def node_generation(x: np.ndarray, layout: VariableLayout, spec: NetworkSpec) -> Dict[str, float]:
    """MWh generated per node over the horizon (dispatch of all plants)."""
    out = {}
    for node in spec.nodes:
        ix = layout.indices(kind="dispatch", node=node.name)
        out[node.name] = float(np.sum(x[ix]))
    return out


def node_demand(spec: NetworkSpec) -> Dict[str, float]:
    return {node.name: float(np.sum(node.demand)) for node in spec.nodes}


def node_investment(
    x: np.ndarray,
    layout: VariableLayout,
    spec: NetworkSpec,
    costs: Dict[str, TechnologyCost],
    annualized: bool = True,
    include_om: bool = False,
) -> Dict[str, float]:
    """Capital committed per node (transmission excluded: lines join two
    nodes and the source never attributes them)."""
    out = {node.name: 0.0 for node in spec.nodes}
    rate = spec.discount_rate
    for node in spec.nodes:
        for tech in list(node.techs) + list(node.storage):
            rec = costs[tech]
            cap = x[layout.get(node.name, tech, "capacity")]
            capital = rec.investment * 1e3
            if rec.energy_investment:
                capital += rec.energy_investment * spec.storage_hours[tech] * 1e3
            value = annualize(capital, rate, rec.lifetime) if annualized else capital
            if include_om:
                value += rec.fixed_om * 1e3
            out[node.name] += float(cap) * value
    return out


def cost_breakdown(
    x: np.ndarray,
    program: lpmod.LinearProgram,
    layout: VariableLayout,
    costs: Dict[str, TechnologyCost],
) -> Dict[str, float]:
    """Objective split into annualized capital+O&M versus dispatch cost."""
    marginal = 0.0
    for tech, rec in costs.items():
        if rec.marginal:
            ix = layout.indices(kind="dispatch", tech=tech)
            if ix:
                marginal += rec.marginal * float(np.sum(x[ix]))
    total = float(program.c @ x)
    return {"total": total, "capital_and_om": total - marginal, "marginal": marginal}


def default_projection(spec: NetworkSpec, layout: VariableLayout) -> Projection:
    """Derived variables for the bundled instance: wind, solar, backup gas,
    both storages, and transmission volume in MW*km (groups without any
    matching columns are dropped)."""
    groups = [
        ("wind", [("onshore_wind", "capacity"), ("offshore_wind", "capacity")]),
        ("solar", [("solar", "capacity")]),
        ("ocgt", [(OCGT, "capacity")]),
        ("hydrogen", [("hydrogen", "capacity")]),
        ("battery", [("battery", "capacity")]),
    ]
    rows = []
    names = []
    for gname, members in groups:
        row = np.zeros(len(layout))
        hit = False
        for tech, kind in members:
            for ix in layout.indices(kind=kind, tech=tech):
                row[ix] = 1.0
                hit = True
        if hit:
            rows.append(row)
            names.append(gname)
    if spec.links:
        row = np.zeros(len(layout))
        lengths = {link.name: link.length_km for link in spec.links}
        for ix in layout.indices(kind="line_capacity"):
            row[ix] = lengths[layout.keys[ix].node]
        rows.append(row)
        names.append("transmission")
    return Projection(np.array(rows), tuple(names))
