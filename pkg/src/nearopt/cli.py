"""Command-line front end: optimize, map, sample, annotate, export, compare,
serve.

Artifacts are plain files in the output directory so every stage can be
rerun or inspected independently:

    optimum.json          f*, per-node capacities, emissions, cost split
    hull.json             converged hull (see the geometry module schema)
    maa_manifest.json     slack, f*, solve counts, volume history, vertices
    samples.csv           uniform interior samples (+ provenance sidecar)
    annotated.csv         samples joined with per-reconstruction metrics
    correlations.csv      Pearson matrix of the sample columns
    hist_<var>.csv        per-variable histograms (bin_left, bin_right, count)
    sweep.csv             metric quantile bands per (co2_reduction, epsilon)
    compare_mga.json      one-at-a-time baseline versus the mapped space

Exit codes: 0 ok, 2 bad config/spec file, 3 infeasible model, 4 not
converged, 5 missing upstream artifact, 6 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from nearopt import esom, lp as lpmod, maa, metrics as metmod, modelspec, sampler
from nearopt.geometry import hull_digest, load_hull, save_hull

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NOT_CONVERGED = 4
EXIT_MISSING = 5
EXIT_NUMERICAL = 6


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    """Everything a pipeline run needs; flags override the spec file's
    [run] table, which overrides these defaults."""

    model_path: Path
    out_dir: Path
    epsilon: float = 0.10
    co2_reduction: Optional[float] = 0.95
    co2_cap: Optional[float] = None
    vol_tol: float = 1e-3
    max_iter: int = 20
    max_batch: Optional[int] = 32
    samples: int = 100_000
    seed: Optional[int] = None
    reconstructions: int = 100
    threads: int = 1
    backend: str = "auto"
    histogram_bins: int = 64

    def __post_init__(self):
        if self.epsilon < 0:
            raise CliError(EXIT_CONFIG, "epsilon must be nonnegative")
        if self.co2_reduction is not None and not 0 <= self.co2_reduction <= 1:
            raise CliError(EXIT_CONFIG, "co2-reduction must lie in [0, 1]")
        if self.samples < 1:
            raise CliError(EXIT_CONFIG, "need at least one sample")

    def require_seed(self) -> int:
        if self.seed is None:
            raise CliError(EXIT_CONFIG, "this command draws random numbers: pass --seed")
        return self.seed


def load_config(args) -> RunConfig:
    model_path = Path(args.config)
    if not model_path.exists():
        raise CliError(EXIT_CONFIG, f"model spec not found: {model_path}")
    try:
        _, _, run = modelspec.load_model(model_path)
    except modelspec.SpecFileError as exc:
        raise CliError(EXIT_CONFIG, str(exc))

    def pick(flag, key, default):
        if flag is not None:
            return flag
        if key in run:
            return run[key]
        return default

    cfg = RunConfig(
        model_path=model_path,
        out_dir=Path(args.out),
        epsilon=float(pick(args.epsilon, "epsilon", 0.10)),
        co2_reduction=_opt_float(pick(args.co2_reduction, "co2_reduction", 0.95)),
        co2_cap=_opt_float(pick(getattr(args, "co2_cap", None), "co2_cap", None)),
        vol_tol=float(pick(args.vol_tol, "vol_tol", 1e-3)),
        max_iter=int(pick(args.max_iter, "max_iter", 20)),
        max_batch=_opt_int(pick(args.max_batch, "max_batch", 32)),
        samples=int(pick(args.samples, "samples", 100_000)),
        seed=_opt_int(pick(args.seed, "seed", None)),
        reconstructions=int(pick(args.reconstructions, "reconstructions", 100)),
        threads=int(pick(args.threads, "threads", 1)),
        backend=str(pick(args.backend, "backend", "auto")),
        histogram_bins=int(pick(getattr(args, "bins", None), "histogram_bins", 64)),
    )
    if getattr(args, "ci", False) and cfg.seed is None:
        raise CliError(EXIT_CONFIG, "--ci requires an explicit --seed")
    return cfg


def _opt_float(v):
    return None if v is None else float(v)


def _opt_int(v):
    return None if v is None else int(v)


def _json_dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _load_model(cfg: RunConfig):
    spec, costs, _ = modelspec.load_model(cfg.model_path)
    return spec, costs


def _capped_spec(cfg: RunConfig, spec, costs):
    """Apply the CO2 policy from config: absolute cap wins, else reduction
    of the computed baseline, else uncapped."""
    if cfg.co2_cap is not None:
        return spec.with_co2_cap(cfg.co2_cap), cfg.co2_cap, None
    if cfg.co2_reduction is not None:
        baseline = esom.co2_baseline(spec, costs, backend=cfg.backend)
        capped = esom.apply_co2_reduction(spec, cfg.co2_reduction, baseline)
        return capped, capped.co2_cap, baseline
    return spec, None, None


# -- commands -----------------------------------------------------------------


def cmd_optimize(cfg: RunConfig) -> int:
    spec, costs = _load_model(cfg)
    capped, cap, baseline = _capped_spec(cfg, spec, costs)
    program, layout = esom.build_lp(capped, costs)
    sol = lpmod.solve(program, backend=cfg.backend)
    if sol.status == lpmod.INFEASIBLE:
        detail = ""
        if cap is not None:
            detail = f" (CO2 cap {cap:.6g} t is the binding policy row; try a smaller reduction)"
        raise CliError(EXIT_INFEASIBLE, f"model is infeasible{detail}")
    if sol.status != lpmod.OPTIMAL:
        raise CliError(EXIT_NUMERICAL, f"optimization ended with status {sol.status}")

    caps = esom.capacities(sol.x, layout)
    doc = {
        "objective": sol.objective_value,
        "co2_cap_t": cap,
        "co2_baseline_t": baseline,
        "emissions_t": esom.emissions(sol.x, layout, costs),
        "capacities_mw": {f"{node}/{tech}": mw for (node, tech), mw in sorted(caps.items())},
        "cost_breakdown": esom.cost_breakdown(sol.x, program, layout, costs),
        "backend": sol.backend,
    }
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    _json_dump(cfg.out_dir / "optimum.json", doc)
    print(f"optimum {sol.objective_value:.6e} written to {cfg.out_dir / 'optimum.json'}")
    return EXIT_OK


def _run_maa(cfg: RunConfig):
    spec, costs = _load_model(cfg)
    capped, cap, baseline = _capped_spec(cfg, spec, costs)
    program, layout = esom.build_lp(capped, costs)
    projection = esom.default_projection(capped, layout)
    try:
        space = maa.run_phase1(
            program,
            projection,
            epsilon=cfg.epsilon,
            vol_tol=cfg.vol_tol,
            max_iter=cfg.max_iter,
            backend=cfg.backend,
            threads=cfg.threads,
            max_batch=cfg.max_batch,
        )
    except maa.SearchSpaceError as exc:
        raise CliError(EXIT_INFEASIBLE, str(exc))
    return spec, costs, capped, program, layout, projection, space, cap, baseline


def manifest_of(space: maa.NearOptimalSpace, cap, baseline, hull_file: str) -> dict:
    return {
        "epsilon": space.epsilon,
        "f_star": space.f_star,
        "co2_cap_t": cap,
        "co2_baseline_t": baseline,
        "solve_count": space.solve_count,
        "volume_history": list(space.volume_history),
        "converged": space.converged,
        "termination": space.termination,
        "derived_names": list(space.projection.derived_names),
        "fixed_coordinates": space.fixed_coordinates,
        "reduced_rank": None if space.reduced_basis is None else int(space.reduced_basis.shape[0]),
        "timings_s": space.timings,
        "hull_file": hull_file,
        "hull_id": None if space.hull is None else hull_digest(space.hull),
        "vertices": [
            {
                "y": [float(v) for v in rec.y],
                "cost": rec.cost,
                "direction": [float(v) for v in rec.direction],
            }
            for rec in space.vertices
        ],
    }


def cmd_maa(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    spec, costs, capped, program, layout, projection, space, cap, baseline = _run_maa(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    if space.hull is not None:
        save_hull(space.hull, cfg.out_dir / "hull.json")
    doc = manifest_of(space, cap, baseline, "hull.json")
    doc["wall_clock_s"] = time.perf_counter() - t0
    _json_dump(cfg.out_dir / "maa_manifest.json", doc)
    print(
        f"phase 1 {'converged' if space.converged else 'hit the iteration cap'}: "
        f"{space.solve_count} directional solves, volume history "
        + " -> ".join(f"{v:.4g}" for v in space.volume_history)
    )
    if not space.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _artifact(cfg: RunConfig, name: str) -> Path:
    path = cfg.out_dir / name
    if not path.exists():
        raise CliError(EXIT_MISSING, f"missing {name}; run the upstream command first")
    return path


def cmd_sample(cfg: RunConfig) -> int:
    seed = cfg.require_seed()
    hull = load_hull(_artifact(cfg, "hull.json"))
    manifest = json.loads(_artifact(cfg, "maa_manifest.json").read_text())
    names = manifest["derived_names"]
    if manifest.get("reduced_rank") is not None:
        names = [f"u{i}" for i in range(hull.dim)]
    table = sampler.sample_polytope(hull, cfg.samples, seed=seed, columns=names)
    table.write_csv(cfg.out_dir / "samples.csv")
    print(f"{table.n} samples -> {cfg.out_dir / 'samples.csv'}")
    return EXIT_OK


def cmd_metrics(cfg: RunConfig) -> int:
    seed = cfg.require_seed()
    table = sampler.read_csv(_artifact(cfg, "samples.csv"))
    manifest = json.loads(_artifact(cfg, "maa_manifest.json").read_text())

    spec, costs = _load_model(cfg)
    capped, cap, baseline = _capped_spec(cfg, spec, costs)
    program, layout = esom.build_lp(capped, costs)
    projection = esom.default_projection(capped, layout)
    lp_w = maa.add_mga_constraint(program, manifest["f_star"], manifest["epsilon"])

    count = min(cfg.reconstructions, table.n)
    picks = sampler.rng_stream(seed, 101).choice(table.n, size=count, replace=False)
    picks = np.sort(picks)
    recon: Dict[int, metmod.ScenarioMetrics] = {}
    failures = []
    for idx in picks:
        y = table.rows[int(idx), : projection.dim]
        sol = maa.reconstruct(lp_w, projection, y, backend=cfg.backend)
        if sol.status != lpmod.OPTIMAL:
            failures.append(int(idx))
            continue
        recon[int(idx)] = metmod.scenario_metrics(
            sol.x, layout, capped, costs, float(program.c @ sol.x)
        )
    annotated = metmod.annotate(table, recon)
    annotated.write_csv(cfg.out_dir / "annotated.csv")

    corr = metmod.pearson_matrix(table)
    _write_matrix_csv(cfg.out_dir / "correlations.csv", corr, table.columns)
    _json_dump(
        cfg.out_dir / "metrics_manifest.json",
        {
            "reconstructions": len(recon),
            "failed_rows": failures,
            "metric_columns": list(metmod.METRIC_COLUMNS),
            "highlights": _highlights(annotated),
        },
    )
    print(
        f"annotated {len(recon)}/{count} rows ({len(failures)} infeasible) -> "
        f"{cfg.out_dir / 'annotated.csv'}"
    )
    return EXIT_OK


def _highlights(annotated: sampler.SampleTable) -> dict:
    """Rows extremal in each headline metric (the decision shortlist)."""
    flag = annotated.column("reconstructed") > 0
    out = {}
    if not np.any(flag):
        return out
    idx = np.flatnonzero(flag)

    def best(column, minimize=True):
        vals = annotated.column(column)[idx]
        pos = int(np.argmin(vals) if minimize else np.argmax(vals))
        return int(idx[pos])

    out["optimum"] = best("system_cost")
    out["high_equality"] = best("gini_self_sufficiency")
    out["low_co2"] = best("co2_t")
    wind_cols = [c for c in annotated.columns if c == "wind"]
    if wind_cols:
        out["large_wind"] = best("wind", minimize=False)
    return out


def _write_matrix_csv(path: Path, mat: np.ndarray, names) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("," + ",".join(names) + "\n")
        for name, row in zip(names, mat):
            fh.write(name + "," + ",".join(repr(float(v)) for v in row) + "\n")


def cmd_export(cfg: RunConfig, co2_sweep=None, eps_sweep=None) -> int:
    if co2_sweep or eps_sweep:
        return _export_sweep(cfg, co2_sweep or [0.0], eps_sweep or [cfg.epsilon])
    table = sampler.read_csv(_artifact(cfg, "annotated.csv"))
    for name in table.columns:
        if name == "reconstructed":
            continue
        series = metmod.histogram_series(table, name, bins=cfg.histogram_bins)
        out = cfg.out_dir / f"hist_{name}.csv"
        with out.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("bin_left,bin_right,count\n")
            for left, right, count in series:
                fh.write(f"{left!r},{right!r},{count}\n")
    print(f"histograms -> {cfg.out_dir}/hist_<var>.csv")
    return EXIT_OK


def _export_sweep(cfg: RunConfig, co2_fracs, eps_values) -> int:
    """Re-run the pipeline over a CO2-reduction x slack grid; the cost
    budget of every run is measured from the globally cheapest scenario."""
    seed = cfg.require_seed()
    spec, costs = _load_model(cfg)
    baseline = esom.co2_baseline(spec, costs, backend=cfg.backend)
    unconstrained, _ = esom.build_lp(spec.with_co2_cap(None), costs)
    f_ref = lpmod.solve(unconstrained, backend=cfg.backend).objective_value

    rows = []
    quantiles = (0.05, 0.25, 0.5, 0.75, 0.95)
    for frac in co2_fracs:
        capped = esom.apply_co2_reduction(spec, frac, baseline)
        program, layout = esom.build_lp(capped, costs)
        projection = esom.default_projection(capped, layout)
        scenario_opt = lpmod.solve(program, backend=cfg.backend)
        if scenario_opt.status != lpmod.OPTIMAL:
            raise CliError(EXIT_INFEASIBLE, f"sweep scenario (reduction {frac}) is infeasible")
        f_scenario = scenario_opt.objective_value
        for eps in eps_values:
            rows.append([frac, eps, "optimal_cost"] + [f_scenario] * 7)
            budget = f_ref + eps * abs(f_ref)
            if f_scenario > budget * (1 + 1e-9):
                # the shared cost budget cannot reach this scenario: its own
                # optimum is already above the slack on the cheapest run
                log.warning(
                    "sweep scenario (reduction %.3g, slack %.3g) exceeds the shared "
                    "budget; bands skipped", frac, eps,
                )
                continue
            space = maa.run_phase1(
                program,
                projection,
                epsilon=eps,
                vol_tol=cfg.vol_tol,
                max_iter=cfg.max_iter,
                backend=cfg.backend,
                threads=cfg.threads,
                max_batch=cfg.max_batch,
                f_star_override=f_ref,
            )
            if space.hull is None:
                continue
            n = min(cfg.samples, 10_000)
            table = sampler.sample_polytope(space.hull, n, seed=seed)
            lp_w = maa.add_mga_constraint(program, f_ref, eps)
            count = min(cfg.reconstructions, table.n)
            picks = np.sort(sampler.rng_stream(seed, 202).choice(table.n, count, replace=False))
            values = {name: [] for name in metmod.METRIC_COLUMNS}
            for idx in picks:
                y = space.from_reduced(table.rows[int(idx)]) if space.reduced_basis is not None \
                    else table.rows[int(idx)]
                sol = maa.reconstruct(lp_w, projection, y, backend=cfg.backend)
                if sol.status != lpmod.OPTIMAL:
                    continue
                m = metmod.scenario_metrics(sol.x, layout, capped, costs, float(program.c @ sol.x))
                for name, value in zip(metmod.METRIC_COLUMNS, m.as_row()):
                    values[name].append(value)
            for name, data in values.items():
                if not data:
                    continue
                arr = np.asarray(data)
                rows.append(
                    [frac, eps, name, arr.min(), *np.quantile(arr, quantiles), arr.max()]
                )
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.out_dir / "sweep.csv"
    with out.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("co2_reduction,epsilon,metric,min,q05,q25,median,q75,q95,max\n")
        for row in rows:
            fh.write(",".join(str(v) if isinstance(v, str) else repr(float(v)) for v in row) + "\n")
    print(f"sweep table -> {out}")
    return EXIT_OK


def cmd_compare_mga(cfg: RunConfig) -> int:
    spec, costs, capped, program, layout, projection, space, cap, baseline = _run_maa(cfg)
    if not space.converged:
        raise CliError(EXIT_NOT_CONVERGED, "phase 1 did not converge; cannot compare against it")
    lp_w = maa.add_mga_constraint(program, space.f_star, cfg.epsilon)
    records = maa.mga_extremes(lp_w, projection, backend=cfg.backend)

    slack_budget = space.f_star * cfg.epsilon
    tol = 1e-6 * max(1.0, float(np.max(np.abs(space.vertex_matrix))))
    points = []
    for rec in records:
        points.append(
            {
                "y": [float(v) for v in rec.y],
                "cost": rec.cost,
                "slack_utilization": (rec.cost - space.f_star) / slack_budget,
                "inside_maa_hull": bool(space.contains_derived(rec.y, tol)),
            }
        )

    ys = np.array([r.y for r in records])
    box_lo, box_hi = ys.min(axis=0), ys.max(axis=0)
    if space.reduced_basis is None and space.hull is not None:
        span = np.maximum(box_hi - box_lo, 0.0)
        box_volume = float(np.prod(span))
        coverage = space.hull.volume / box_volume if box_volume > 0 else None
    else:
        coverage = None

    doc = {
        "mga_solve_count": len(records),
        "maa_solve_count": space.solve_count,
        "points": points,
        "all_inside": all(p["inside_maa_hull"] for p in points),
        "box_lo": [float(v) for v in box_lo],
        "box_hi": [float(v) for v in box_hi],
        "hull_volume": None if space.hull is None else space.hull.volume,
        "coverage_fraction_of_mga_box": coverage,
    }
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    _json_dump(cfg.out_dir / "compare_mga.json", doc)
    print(
        f"one-at-a-time baseline: {len(records)} solves vs {space.solve_count} for the full map; "
        f"hull fills {coverage:.3f} of the spanned box" if coverage is not None else
        f"one-at-a-time baseline: {len(records)} solves vs {space.solve_count}"
    )
    return EXIT_OK


def cmd_serve(cfg: RunConfig, port: int, ui_dir: Optional[Path]) -> int:
    from nearopt.server import serve_forever

    annotated = _artifact(cfg, "annotated.csv")
    manifest = json.loads(_artifact(cfg, "maa_manifest.json").read_text())
    metrics_manifest_path = cfg.out_dir / "metrics_manifest.json"
    metrics_manifest = (
        json.loads(metrics_manifest_path.read_text()) if metrics_manifest_path.exists() else {}
    )
    corr_path = cfg.out_dir / "correlations.csv"
    serve_forever(
        annotated_csv=annotated,
        manifest=manifest,
        metrics_manifest=metrics_manifest,
        correlations_csv=corr_path if corr_path.exists() else None,
        port=port,
        ui_dir=ui_dir,
    )
    return EXIT_OK


# -- argument wiring ----------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="model spec TOML")
    p.add_argument("--out", default="out", help="artifact directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--backend", default=None, choices=["auto", "simplex", "highs"])
    p.add_argument("--epsilon", type=float, default=None, help="cost slack fraction")
    p.add_argument("--co2-reduction", dest="co2_reduction", type=float, default=None)
    p.add_argument("--co2-cap", dest="co2_cap", type=float, default=None)
    p.add_argument("--vol-tol", dest="vol_tol", type=float, default=None)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p.add_argument("--max-batch", dest="max_batch", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--reconstructions", type=int, default=None)
    p.add_argument("--ci", action="store_true", help="require explicit seeding")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nearopt",
        description="Map, sample and explore the near-optimal space of a "
        "capacity-expansion model",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("optimize", "solve the cost optimum and write its summary"),
        ("maa", "map the near-optimal space (phase 1)"),
        ("sample", "draw uniform interior samples (phase 2)"),
        ("metrics", "reconstruct samples and join metric columns"),
        ("export", "histograms, correlation matrix, optional scenario sweep"),
        ("compare-mga", "one-at-a-time baseline versus the mapped space"),
        ("serve", "serve the dataset and explorer over local HTTP"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "export":
            p.add_argument("--co2-sweep", default=None, help="comma list of reduction fractions")
            p.add_argument("--epsilon-sweep", default=None, help="comma list of slack values")
            p.add_argument("--bins", type=int, default=None)
        if name == "serve":
            p.add_argument("--port", type=int, default=8787)
            p.add_argument("--ui-dir", default=None, help="static explorer assets")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
        datefmt="%H:%M:%S",
    )
    try:
        cfg = load_config(args)
        if args.command == "optimize":
            return cmd_optimize(cfg)
        if args.command == "maa":
            return cmd_maa(cfg)
        if args.command == "sample":
            return cmd_sample(cfg)
        if args.command == "metrics":
            return cmd_metrics(cfg)
        if args.command == "export":
            co2_sweep = _parse_sweep(args.co2_sweep)
            eps_sweep = _parse_sweep(args.epsilon_sweep)
            return cmd_export(cfg, co2_sweep, eps_sweep)
        if args.command == "compare-mga":
            return cmd_compare_mga(cfg)
        if args.command == "serve":
            ui = Path(args.ui_dir) if args.ui_dir else None
            return cmd_serve(cfg, args.port, ui)
        raise CliError(EXIT_CONFIG, f"unknown command {args.command}")
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except lpmod.NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _parse_sweep(text):
    if not text:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise CliError(EXIT_CONFIG, f"bad sweep list {text!r}")


if __name__ == "__main__":
    sys.exit(main())
