#!/usr/bin/env python3
"""Build the explorer test fixtures from the host pipeline.

Runs the small two-node instance end to end, samples the mapped space,
joins metric columns, then emits:

    test/fixtures/toy_dataset.json   columnar annotated table (null = NaN)
    test/fixtures/pinsets.json       20 randomized pin sets
    test/fixtures/expected.json      host-side conditional statistics per
                                     pin set (the oracle the UI must match)
"""

import json
import sys
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent.parent / "tests"))

from test_cli import tiny_spec  # noqa: E402

from nearopt import lp as lpmod  # noqa: E402
from nearopt import maa, metrics as metmod, sampler  # noqa: E402
from nearopt.esom import (  # noqa: E402
    apply_co2_reduction,
    build_lp,
    co2_baseline,
    default_costs,
    default_projection,
)

N_SAMPLES = 20_000
N_RECONSTRUCT = 60
N_PINSETS = 20
HIST_BINS = 8
SEED = 31


def build_annotated() -> sampler.SampleTable:
    costs = default_costs()
    spec = tiny_spec()
    baseline = co2_baseline(spec, costs)
    capped = apply_co2_reduction(spec, 0.6, baseline)
    program, layout = build_lp(capped, costs)
    projection = default_projection(capped, layout)
    space = maa.run_phase1(
        program, projection, epsilon=0.15, vol_tol=1e-3, max_iter=40,
        backend="highs", max_batch=16,
    )
    assert space.converged
    table = sampler.sample_polytope(
        space.hull, N_SAMPLES, seed=SEED, columns=projection.derived_names
    )
    lp_w = maa.add_mga_constraint(program, space.f_star, 0.15)
    picks = np.sort(sampler.rng_stream(SEED, 101).choice(table.n, N_RECONSTRUCT, replace=False))
    recon = {}
    for idx in picks:
        sol = maa.reconstruct(lp_w, projection, table.rows[int(idx)], backend="highs")
        if sol.status != lpmod.OPTIMAL:
            continue
        recon[int(idx)] = metmod.scenario_metrics(
            sol.x, layout, capped, costs, float(program.c @ sol.x)
        )
    return metmod.annotate(table, recon), projection.derived_names


def random_pinsets(table, sample_columns, rng):
    pinsets = []
    for _ in range(N_PINSETS):
        k = int(rng.integers(1, 4))
        names = rng.choice(sample_columns, size=k, replace=False)
        pins = {}
        for name in names:
            col = table.column(str(name))
            finite = col[np.isfinite(col)]
            a, b = np.sort(rng.uniform(finite.min(), finite.max(), size=2))
            # widen degenerate intervals so most pin sets keep some rows
            if b - a < 0.2 * (finite.max() - finite.min()):
                b = min(finite.max(), a + 0.35 * (finite.max() - finite.min()))
            pins[str(name)] = [float(a), float(b)]
        pinsets.append(pins)
    return pinsets


def filtered_mask(table, pins):
    mask = np.ones(table.n, dtype=bool)
    for name, (lo, hi) in pins.items():
        col = table.column(name)
        with np.errstate(invalid="ignore"):
            mask &= (col >= lo) & (col <= hi)
    return mask


def expected_stats(table, pins, sample_columns):
    mask = filtered_mask(table, pins)
    rows = table.rows[mask]
    out = {"surviving": int(mask.sum()), "columns": {}, "histograms": {}}
    sub = sampler.SampleTable(table.columns, rows.copy(), table.seed)
    sample_set = set(sample_columns)
    for i, name in enumerate(table.columns):
        col = rows[:, i]
        finite = col[np.isfinite(col)]
        if finite.size == 0:
            out["columns"][name] = {"count": 0, "min": None, "max": None, "mean": None}
            continue
        out["columns"][name] = {
            "count": int(finite.size),
            "min": float(finite.min()),
            "max": float(finite.max()),
            "mean": float(finite.mean()),
        }
        if name in sample_set:
            series = metmod.histogram_series(sub, name, bins=HIST_BINS)
            out["histograms"][name] = [
                {"left": left, "right": right, "count": count} for left, right, count in series
            ]
    if out["surviving"] >= 2:
        ix = [table.columns.index(c) for c in sample_columns]
        corr = metmod.pearson_matrix(rows[:, ix])
        out["correlations"] = [[float(v) for v in row] for row in corr]
    else:
        out["correlations"] = None
    return out


def main():
    fixtures = HERE.parent / "test" / "fixtures"
    fixtures.mkdir(parents=True, exist_ok=True)

    table, sample_columns = build_annotated()
    doc = {
        "columns": list(table.columns),
        "sample_columns": list(sample_columns),
        "data": [
            [None if np.isnan(v) else float(v) for v in table.rows[:, i]]
            for i in range(len(table.columns))
        ],
    }
    (fixtures / "toy_dataset.json").write_text(json.dumps(doc))

    rng = np.random.default_rng(SEED)
    pinsets = random_pinsets(table, list(sample_columns), rng)
    (fixtures / "pinsets.json").write_text(json.dumps(pinsets, indent=1))

    expected = [expected_stats(table, pins, list(sample_columns)) for pins in pinsets]
    (fixtures / "expected.json").write_text(json.dumps(expected))
    survivors = [e["surviving"] for e in expected]
    print(f"fixtures written: {table.n} rows, survivors per pin set: {survivors}")


if __name__ == "__main__":
    main()
