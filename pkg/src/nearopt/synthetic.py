"""Seeded synthetic demand and availability series, plus the bundled
reference instance (4 nodes, 3 links, two weeks hourly).

Demand is a base load with a diurnal sinusoid and mild noise; solar
availability follows a clipped diurnal arc with day-to-day clearness;
wind availability is a mean-reverting autocorrelated process squashed
into [0, 1].  Everything derives from one seed through named streams, so
instances are reproducible.
"""

from __future__ import annotations

from typing import Dict, Tuple

import numpy as np

from nearopt.esom import Link, NetworkSpec, Node
from nearopt.sampler import rng_stream


def demand_series(T: int, base_mw: float, rng: np.random.Generator) -> np.ndarray:
    hours = np.arange(T)
    diurnal = 1.0 + 0.22 * np.sin(2.0 * np.pi * (hours - 9.0) / 24.0)
    noise = 1.0 + 0.015 * rng.standard_normal(T)
    return np.clip(base_mw * diurnal * noise, 0.0, None)


def solar_series(T: int, rng: np.random.Generator, peak: float = 0.85) -> np.ndarray:
    hours = np.arange(T)
    arc = np.sin(np.pi * ((hours % 24) - 6.0) / 12.0)
    arc = np.clip(arc, 0.0, None)
    days = (T + 23) // 24
    clearness = np.repeat(rng.uniform(0.65, 1.0, size=days), 24)[:T]
    return np.clip(peak * arc * clearness, 0.0, 1.0)


def wind_series(T: int, rng: np.random.Generator, mean: float = 0.35) -> np.ndarray:
    # AR(1) in a latent variable, squashed through a logistic into [0, 1]
    latent = np.empty(T)
    level = rng.normal(0.0, 0.5)
    for t in range(T):
        level = 0.985 * level + 0.12 * rng.standard_normal()
        latent[t] = level
    offset = np.log(mean / (1.0 - mean))
    return 1.0 / (1.0 + np.exp(-(latent + offset)))


def reference_spec(seed: int = 0, horizon: int = 336) -> NetworkSpec:
    """The bundled desk-scale instance: 4 nodes in a line, 3 links.

    Geographic potentials are finite (multiples of the nodal base load), so
    capacity axes of the near-optimal space hit real limits instead of
    running on pure cost pressure."""
    base_demand = [9000.0, 5200.0, 7400.0, 3100.0]
    gdp = [310e9, 150e9, 240e9, 80e9]
    wind_mean = [0.42, 0.30, 0.36, 0.48]
    solar_peak = [0.70, 0.92, 0.80, 0.65]
    potential_factors = {
        "onshore_wind": 1.1,
        "offshore_wind": 0.7,
        "solar": 1.6,
        "ocgt": 1.2,
        "hydrogen": 0.4,
        "battery": 0.4,
    }

    nodes = []
    for i, name in enumerate(["N1", "N2", "N3", "N4"]):
        nodes.append(
            Node(
                name=name,
                demand=demand_series(horizon, base_demand[i], rng_stream(seed, 10 + i)),
                availability={
                    "onshore_wind": wind_series(horizon, rng_stream(seed, 20 + i), wind_mean[i]),
                    "offshore_wind": np.clip(
                        wind_series(horizon, rng_stream(seed, 30 + i), wind_mean[i] + 0.12), 0.0, 1.0
                    ),
                    "solar": solar_series(horizon, rng_stream(seed, 40 + i), solar_peak[i]),
                },
                gdp=gdp[i],
                potential={
                    tech: factor * base_demand[i] for tech, factor in potential_factors.items()
                },
            )
        )
    links = (
        Link("N1", "N2", 420.0),
        Link("N2", "N3", 310.0),
        Link("N3", "N4", 550.0),
    )
    return NetworkSpec(nodes=tuple(nodes), links=links, horizon=horizon)
