"""Model spec files: a TOML document plus per-quantity time-series CSVs.

Layout of the TOML document:

    [run]                       # instance-wide settings and CLI defaults
    horizon = 336
    discount_rate = 0.07
    co2_reduction = 0.95        # or co2_cap = <absolute tonnes>
    epsilon = 0.10              # optional RunConfig defaults
    [series]
    demand = "demand.csv"
    [series.availability]
    solar = "availability_solar.csv"
    [tech.<name>] ...           # cost records (see fields below)
    [node.<name>]               # gdp, techs, storage, potential.<tech>
    [link.<A>-<B>]              # length_km

Series CSVs have header ``hour,<node>,...`` (one column per node), UTF-8,
LF line endings, '.' decimals, one row per hour.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - version-dependent import
    import tomli as tomllib

from nearopt.esom import (
    DEFAULT_EFFICIENCIES,
    DEFAULT_STORAGE_HOURS,
    OCGT,
    TRANSMISSION,
    Link,
    NetworkSpec,
    Node,
    TechnologyCost,
    default_costs,
)


class SpecFileError(ValueError):
    """Malformed model spec file."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")


def read_series_csv(path) -> Dict[str, np.ndarray]:
    """Column name -> series from an ``hour,<node>,...`` CSV."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "hour":
            raise SpecFileError(path, "first column must be 'hour'")
        names = header[1:]
        data = {name: [] for name in names}
        for ln, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SpecFileError(path, f"line {ln}: expected {len(header)} cells")
            for name, cell in zip(names, row[1:]):
                try:
                    data[name].append(float(cell))
                except ValueError as exc:
                    raise SpecFileError(path, f"line {ln}: bad number {cell!r}") from exc
    return {name: np.asarray(vals, float) for name, vals in data.items()}


def write_series_csv(path, series: Dict[str, np.ndarray]) -> None:
    path = Path(path)
    names = list(series)
    T = len(next(iter(series.values())))
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["hour"] + names)
        for t in range(T):
            writer.writerow([t] + [repr(float(series[name][t])) for name in names])


def _tech_from_table(name: str, table: dict) -> TechnologyCost:
    if name == TRANSMISSION:
        return TechnologyCost(
            name,
            investment=float(table.get("investment_per_mw_km", 400.0)),
            fixed_om=float(table.get("fixed_om_fraction", 0.02)),
            marginal=0.0,
            lifetime=float(table.get("lifetime", 40)),
            fixed_om_is_fraction=True,
            per_line_investment=float(table.get("per_line_investment", 150_000.0)),
        )
    return TechnologyCost(
        name,
        investment=float(table["investment"]),
        fixed_om=float(table.get("fixed_om", 0.0)),
        marginal=float(table.get("marginal", 0.0)),
        lifetime=float(table["lifetime"]),
        co2_intensity=float(table.get("co2_intensity", 0.0)),
        energy_investment=float(table.get("energy_investment", 0.0)),
    )


def load_model(path) -> Tuple[NetworkSpec, Dict[str, TechnologyCost], dict]:
    """(spec, costs, run settings) from a model spec file.

    Relative series paths resolve next to the TOML file.  Cost records not
    present in the file fall back to the bundled table.
    """
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise SpecFileError(path, f"TOML parse error: {exc}") from exc

    run = dict(doc.get("run", {}))
    horizon = int(run.get("horizon", 0))
    if horizon < 1:
        raise SpecFileError(path, "[run] horizon must be a positive hour count")

    costs = default_costs()
    for name, table in doc.get("tech", {}).items():
        try:
            costs[name] = _tech_from_table(name, table)
        except (KeyError, ValueError) as exc:
            raise SpecFileError(path, f"[tech.{name}]: {exc}") from exc

    series_cfg = doc.get("series", {})
    if "demand" not in series_cfg:
        raise SpecFileError(path, "[series] demand file is required")
    demand = read_series_csv(path.parent / series_cfg["demand"])
    availability: Dict[str, Dict[str, np.ndarray]] = {}
    for tech, fname in series_cfg.get("availability", {}).items():
        availability[tech] = read_series_csv(path.parent / fname)

    nodes = []
    node_tables = doc.get("node", {})
    if not node_tables:
        raise SpecFileError(path, "at least one [node.<name>] section is required")
    for name, table in node_tables.items():
        if name not in demand:
            raise SpecFileError(path, f"node {name} missing from the demand CSV")
        techs = tuple(table.get("techs", ("onshore_wind", "offshore_wind", "solar", OCGT)))
        storage = tuple(table.get("storage", ("hydrogen", "battery")))
        avail = {}
        for tech in techs:
            if tech in availability:
                if name not in availability[tech]:
                    raise SpecFileError(path, f"node {name} missing from the {tech} availability CSV")
                avail[tech] = availability[tech][name]
        potential = {k: float(v) for k, v in table.get("potential", {}).items()}
        nodes.append(
            Node(
                name=name,
                demand=demand[name],
                availability=avail,
                techs=techs,
                storage=storage,
                gdp=float(table.get("gdp", 0.0)),
                potential=potential,
            )
        )

    links = []
    for name, table in doc.get("link", {}).items():
        if "-" not in name:
            raise SpecFileError(path, f"link section [link.{name}] must be named <A>-<B>")
        a, b = name.split("-", 1)
        links.append(Link(a, b, float(table["length_km"])))

    co2_cap = run.get("co2_cap")
    spec = NetworkSpec(
        nodes=tuple(nodes),
        links=tuple(links),
        horizon=horizon,
        co2_cap=float(co2_cap) if co2_cap is not None else None,
        storage_hours={**DEFAULT_STORAGE_HOURS, **run.get("storage_hours", {})},
        efficiencies={
            **DEFAULT_EFFICIENCIES,
            **{k: tuple(v) for k, v in run.get("efficiencies", {}).items()},
        },
        discount_rate=float(run.get("discount_rate", 0.07)),
    )
    return spec, costs, run


def write_model(directory, spec: NetworkSpec, costs: Optional[Dict[str, TechnologyCost]] = None,
                run_extra: Optional[dict] = None) -> Path:
    """Materialize a NetworkSpec as model.toml + series CSVs; returns the
    TOML path.  Used for the bundled instance and test fixtures."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    costs = costs or default_costs()

    write_series_csv(directory / "demand.csv", {n.name: n.demand for n in spec.nodes})
    vre = sorted({tech for n in spec.nodes for tech in n.availability})
    for tech in vre:
        cols = {n.name: n.availability[tech] for n in spec.nodes if tech in n.availability}
        write_series_csv(directory / f"availability_{tech}.csv", cols)

    lines = ["[run]", f"horizon = {spec.horizon}", f"discount_rate = {spec.discount_rate}"]
    if spec.co2_cap is not None:
        lines.append(f"co2_cap = {spec.co2_cap}")
    for key, value in (run_extra or {}).items():
        lines.append(f"{key} = {_toml_value(value)}")
    lines += ["", "[series]", 'demand = "demand.csv"']
    if vre:
        lines.append("[series.availability]")
        for tech in vre:
            lines.append(f'{tech} = "availability_{tech}.csv"')
    for name, rec in costs.items():
        lines += ["", f"[tech.{name}]"]
        if name == TRANSMISSION:
            lines.append(f"investment_per_mw_km = {rec.investment}")
            lines.append(f"per_line_investment = {rec.per_line_investment}")
            lines.append(f"fixed_om_fraction = {rec.fixed_om}")
            lines.append(f"lifetime = {rec.lifetime}")
        else:
            lines.append(f"investment = {rec.investment}")
            lines.append(f"fixed_om = {rec.fixed_om}")
            lines.append(f"marginal = {rec.marginal}")
            lines.append(f"lifetime = {rec.lifetime}")
            if rec.co2_intensity:
                lines.append(f"co2_intensity = {rec.co2_intensity}")
            if rec.energy_investment:
                lines.append(f"energy_investment = {rec.energy_investment}")
    for node in spec.nodes:
        lines += ["", f"[node.{node.name}]", f"gdp = {node.gdp}"]
        lines.append("techs = [" + ", ".join(f'"{t}"' for t in node.techs) + "]")
        lines.append("storage = [" + ", ".join(f'"{s}"' for s in node.storage) + "]")
        for tech, cap in node.potential.items():
            lines.append(f"potential.{tech} = {cap}")
    for link in spec.links:
        lines += ["", f"[link.{link.name}]", f"length_km = {link.length_km}"]

    toml_path = directory / "model.toml"
    toml_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return toml_path


def _toml_value(value):
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value)
