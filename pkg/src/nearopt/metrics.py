"""Socio-economic and statistical metrics over solutions and sample tables.

Gini coefficients measure how unevenly a per-node quantity (generation,
investment) is distributed relative to per-node demand: nodes are sorted
by quantity/demand ratio, the cumulative shares trace a Lorenz curve, and
G = A/(A+B) is the normalized area between the curve and the equality
line.  Land use converts built capacity to km^2 through fixed energy
densities; implementation time asks how long the slowest node needs if
annual spending is capped at a fraction of its GDP.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from nearopt.esom import (
    NetworkSpec,
    TechnologyCost,
    VariableLayout,
    capacities,
    emissions,
    node_demand,
    node_generation,
    node_investment,
)
from nearopt.sampler import SampleTable

#: MW of capacity per km^2 of land
ONSHORE_WIND_DENSITY = 20.0
SOLAR_DENSITY = 145.0
#: ceiling on annual energy-system spending as a share of GDP
GDP_SPEND_CAP = 0.10

METRIC_COLUMNS = (
    "gini_self_sufficiency",
    "gini_investment",
    "land_use_km2",
    "implementation_years",
    "co2_t",
    "system_cost",
)


@dataclass(frozen=True)
class LorenzCurve:
    """Cumulative (demand share, quantity share) pairs from (0,0) to (1,1),
    nodes ordered by quantity/demand ratio so the curve sags below the
    equality line."""

    points: np.ndarray

    def __post_init__(self):
        self.points.flags.writeable = False

    @property
    def area_under(self) -> float:
        x = self.points[:, 0]
        y = self.points[:, 1]
        return float(np.trapezoid(y, x))

    @property
    def area_a(self) -> float:
        """Area between the equality line and the curve."""
        return 0.5 - self.area_under

    @property
    def area_b(self) -> float:
        """Area under the curve."""
        return self.area_under


@dataclass(frozen=True)
class ScenarioMetrics:
    gini_self_sufficiency: float
    gini_investment: float
    land_use_km2: float
    implementation_years: float
    co2_t: float
    system_cost: float

    def __post_init__(self):
        for name in METRIC_COLUMNS:
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {value}")
        if self.gini_self_sufficiency > 1 or self.gini_investment > 1:
            raise ValueError("Gini coefficients cannot exceed 1")

    def as_row(self) -> List[float]:
        return [getattr(self, name) for name in METRIC_COLUMNS]


def lorenz_curve(demand_per_node: Sequence[float], quantity_per_node: Sequence[float]) -> LorenzCurve:
    w = np.asarray(demand_per_node, float)
    q = np.asarray(quantity_per_node, float)
    if w.shape != q.shape:
        raise ValueError("demand and quantity vectors must have equal length")
    if np.any(w <= 0):
        raise ValueError("per-node demand must be positive")
    if np.any(q < 0):
        raise ValueError("quantities must be nonnegative")
    order = np.argsort(q / w, kind="stable")
    wx = np.concatenate([[0.0], np.cumsum(w[order])]) / w.sum()
    total_q = q.sum()
    if total_q == 0:
        qy = np.zeros(len(w) + 1)
        qy[-1] = 1.0  # jump at the endpoint; degenerate all-zero quantity
    else:
        qy = np.concatenate([[0.0], np.cumsum(q[order])]) / total_q
    return LorenzCurve(np.column_stack([wx, qy]))


def gini(demand_per_node: Sequence[float], quantity_per_node: Sequence[float]) -> float:
    """G = A/(A+B) over the Lorenz curve; 0 means every node's quantity
    share equals its demand share.

    A zero total quantity is the total-inequality convention G = 1 (some
    demand exists but nothing is produced anywhere)."""
    q = np.asarray(quantity_per_node, float)
    w = np.asarray(demand_per_node, float)
    if w.shape != q.shape:
        raise ValueError("demand and quantity vectors must have equal length")
    if w.sum() <= 0 or np.any(w <= 0):
        raise ValueError("per-node demand must be positive")
    if q.sum() == 0:
        return 1.0
    curve = lorenz_curve(w, q)
    g = 1.0 - 2.0 * curve.area_under
    return float(min(max(g, 0.0), 1.0))


def land_use(x: np.ndarray, layout: VariableLayout) -> float:
    """km^2 of land: onshore wind and solar only; offshore, gas and
    storage take no land."""
    caps = capacities(x, layout)
    onshore = sum(v for (node, tech), v in caps.items() if tech == "onshore_wind")
    solar = sum(v for (node, tech), v in caps.items() if tech == "solar")
    if onshore < -1e-9 or solar < -1e-9:
        raise ValueError("negative capacity reached the land-use metric")
    return max(onshore, 0.0) / ONSHORE_WIND_DENSITY + max(solar, 0.0) / SOLAR_DENSITY


def implementation_time(
    x: np.ndarray,
    layout: VariableLayout,
    spec: NetworkSpec,
    costs: Dict[str, TechnologyCost],
    gdp_per_node: Optional[Dict[str, float]] = None,
) -> float:
    """Years until the slowest node finishes building, spending at most 10%
    of its GDP per year on overnight capital (transmission excluded)."""
    gdp = gdp_per_node or {n.name: n.gdp for n in spec.nodes}
    for name, value in gdp.items():
        if value <= 0:
            raise ValueError(f"node {name}: GDP must be positive")
    capex = node_investment(x, layout, spec, costs, annualized=False)
    return max(capex[name] / (GDP_SPEND_CAP * gdp[name]) for name in capex)


def pearson_matrix(table) -> np.ndarray:
    """Pairwise Pearson correlations of the table columns (symmetric, unit
    diagonal).  Constant columns correlate as 0 by convention."""
    rows = table.rows if isinstance(table, SampleTable) else np.asarray(table, float)
    n, d = rows.shape
    if n < 2:
        raise ValueError("need at least two rows")
    centered = rows - rows.mean(axis=0)
    cov = centered.T @ centered
    std = np.sqrt(np.diag(cov))
    out = np.eye(d)
    for a in range(d):
        for b in range(a + 1, d):
            if std[a] == 0 or std[b] == 0:
                out[a, b] = out[b, a] = 0.0
            else:
                out[a, b] = out[b, a] = float(np.clip(cov[a, b] / (std[a] * std[b]), -1.0, 1.0))
    return out


def scenario_metrics(
    x: np.ndarray,
    layout: VariableLayout,
    spec: NetworkSpec,
    costs: Dict[str, TechnologyCost],
    system_cost: float,
) -> ScenarioMetrics:
    """All per-solution metrics of one full (nodal) solution."""
    demand = node_demand(spec)
    names = list(demand)
    w = [demand[k] for k in names]
    generation = node_generation(x, layout, spec)
    invest = node_investment(x, layout, spec, costs, annualized=True)
    return ScenarioMetrics(
        gini_self_sufficiency=gini(w, [generation[k] for k in names]),
        gini_investment=gini(w, [invest[k] for k in names]),
        land_use_km2=land_use(x, layout),
        implementation_years=implementation_time(x, layout, spec, costs),
        co2_t=emissions(x, layout, costs),
        system_cost=system_cost,
    )


def annotate(samples: SampleTable, reconstructions: Dict[int, ScenarioMetrics]) -> SampleTable:
    """Join metric columns onto sampled rows.

    `reconstructions` maps row index -> metrics; rows without one keep NaN
    metric cells and a 0 in the `reconstructed` flag column."""
    for idx in reconstructions:
        if not 0 <= idx < samples.n:
            raise ValueError(f"reconstruction row {idx} outside the table")
    extra = np.full((samples.n, len(METRIC_COLUMNS) + 1), np.nan)
    extra[:, -1] = 0.0
    for idx, metrics in reconstructions.items():
        extra[idx, :-1] = metrics.as_row()
        extra[idx, -1] = 1.0
    columns = samples.columns + METRIC_COLUMNS + ("reconstructed",)
    rows = np.hstack([samples.rows, extra])
    provenance = dict(samples.provenance)
    provenance["metric_columns"] = list(METRIC_COLUMNS)
    return SampleTable(columns, rows, samples.seed, provenance)


def histogram_series(table: SampleTable, column: str, bins: int = 64):
    """(bin_left, bin_right, count) triples over the finite values."""
    values = table.column(column)
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise ValueError(f"column {column} has no finite values")
    counts, edges = np.histogram(values, bins=bins)
    return [(float(edges[i]), float(edges[i + 1]), int(c)) for i, c in enumerate(counts)]
