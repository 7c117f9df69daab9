"""Batch front-end: scenario generation, single and ensemble solves with
optional warm start, solution verification, exact-model export, the
enumeration oracle, and aggregation of comparison metrics.

Exit codes: 0 success, 1 infeasible solution / failed verification,
2 usage or schema errors.
"""

from __future__ import annotations

import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from .alns import SearchConfig, config_from_dict, run_alns
from .destroy import RemovalParams
from .instance import Instance, load_instance
from .milp import brute_force_solve, export_lp
from .scenarios import ScenarioConfig, build_scenario, scenario_grid
from .solution import (
    check_feasibility, evaluate, load_solution, save_solution, solution_to_dict,
)

REPORT_COLUMNS = ["scenario_id", "run", "total", "b1", "b2", "b3_m", "b4_s",
                  "b5", "b6", "mc_per_platform", "iters", "best_iter", "wall_ms"]


def _fail_schema(msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(2)


@click.group()
def main():
    """Multi-purpose pickup-and-delivery toolkit."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", default=".", type=click.Path(file_okay=False))
def generate(config_path, out_dir):
    """Generate instance files and a manifest from a scenario config.

    The config either holds a single scenario under "scenario" (rng_seed is
    required) or a full study grid under "grid" (base_seed required).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        with open(config_path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        _fail_schema(f"config is not valid JSON: {exc}")

    entries = []
    if "grid" in doc:
        grid = doc["grid"]
        if "base_seed" not in grid:
            _fail_schema("grid config is missing required field 'base_seed'")
        for sid, cfg in scenario_grid(
                n_passenger=grid.get("n_passenger", 50),
                n_freight=grid.get("n_freight", 50),
                base_seed=grid["base_seed"]):
            entries.append((f"s{sid:02d}", cfg))
    elif "scenario" in doc:
        sc = dict(doc["scenario"])
        if "rng_seed" not in sc:
            _fail_schema("scenario config is missing required field 'rng_seed'")
        sid = sc.pop("scenario_id", None)
        try:
            cfg = ScenarioConfig(**sc)
        except (TypeError, ValueError) as exc:
            _fail_schema(f"invalid scenario config: {exc}")
        entries.append((sid or cfg.label, cfg))
    else:
        _fail_schema("config must contain a 'scenario' or 'grid' section")

    manifest = out / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["scenario_id", "spatial", "tw", "n_sd", "seed", "instance"])
        for sid, cfg in entries:
            inst = build_scenario(cfg)
            path = out / f"{sid}.instance.json"
            from .instance import save_instance
            save_instance(inst, path)
            wr.writerow([sid, cfg.spatial, cfg.tw, cfg.n_service_depots,
                         cfg.rng_seed, path.name])
    click.echo(f"wrote {len(entries)} instance file(s) and {manifest}")


def _load_params(params_path) -> tuple[SearchConfig, RemovalParams]:
    if params_path is None:
        return SearchConfig(), RemovalParams()
    try:
        with open(params_path) as fh:
            doc = json.load(fh)
        return config_from_dict(doc)
    except (json.JSONDecodeError, ValueError, TypeError) as exc:
        _fail_schema(f"invalid parameter file: {exc}")


def _solve_one(args):
    (instance_path, run_idx, seed, cfg_doc, warm_path, trace_path) = args
    inst = load_instance(instance_path)
    cfg, removal = config_from_dict(cfg_doc)
    cfg = SearchConfig(**{**cfg.__dict__, "rng_seed": seed})
    rng = np.random.default_rng(seed)
    init = None
    if warm_path:
        init = load_solution(inst, warm_path)
    t0 = time.perf_counter()
    best, trace = run_alns(inst, cfg, init=init, rng=rng, removal=removal)
    wall_ms = (time.perf_counter() - t0) * 1000.0
    if trace_path:
        trace.write_csv(trace_path)
    ob = evaluate(inst, best)
    row = [ob.total, ob.b1, ob.b2, ob.b3, ob.b4, ob.b5, ob.b6,
           (ob.b5 / ob.b1 if ob.b1 else 0.0), trace.iterations,
           trace.best_iteration, wall_ms]
    return run_idx, solution_to_dict(inst, best), row


@main.command()
@click.argument("instance_path", type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--ensemble", default=1, show_default=True, type=int)
@click.option("--warm-start", "warm_path", default=None, type=click.Path(exists=True))
@click.option("--params", "params_path", default=None, type=click.Path(exists=True))
@click.option("--trace", "trace_path", default=None, type=click.Path())
@click.option("--max-iterations", default=None, type=int)
@click.option("--jobs", default=1, show_default=True, type=int)
@click.option("--out-dir", default=".", type=click.Path(file_okay=False))
@click.option("--scenario-id", default=None)
def solve(instance_path, seed, ensemble, warm_path, params_path, trace_path,
          max_iterations, jobs, out_dir, scenario_id):
    """Run seeded searches on an instance and write solutions plus a report.

    Ensemble run i uses seed ``seed + i``.  A warm-start solution is verified
    first and used as the initial solution of every run.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        inst = load_instance(instance_path)
    except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        _fail_schema(f"cannot read instance: {exc}")
    cfg, removal = _load_params(params_path)
    if max_iterations is not None:
        cfg = SearchConfig(**{**cfg.__dict__, "lam": max_iterations,
                              "lambda_min": min(cfg.lambda_min, max_iterations)})
    if warm_path:
        try:
            warm = load_solution(inst, warm_path)
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            _fail_schema(f"cannot read warm-start solution: {exc}")
        report = check_feasibility(inst, warm)
        if report:
            click.echo("warm-start solution is infeasible:", err=True)
            for v in report:
                click.echo(f"  constraint {v.constraint}: {v.detail}", err=True)
            sys.exit(1)

    sid = scenario_id or Path(instance_path).name.split(".")[0]
    cfg_doc = {**cfg.__dict__, **removal.__dict__}
    cfg_doc["lambda"] = cfg_doc.pop("lam")

    tasks = []
    for i in range(ensemble):
        tp = None
        if trace_path:
            tp = trace_path if ensemble == 1 else f"{trace_path}.run{i}"
        tasks.append((instance_path, i, seed + i, cfg_doc, warm_path, tp))

    if jobs > 1 and ensemble > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_solve_one, tasks))
    else:
        results = [_solve_one(t) for t in tasks]
    results.sort(key=lambda r: r[0])

    rows = []
    best_total = float("inf")
    best_doc = None
    for run_idx, sol_doc, row in results:
        rows.append([sid, run_idx] + row)
        if row[0] < best_total:
            best_total = row[0]
            best_doc = sol_doc
        with open(out / f"{sid}.run{run_idx}.solution.json", "w") as fh:
            json.dump(sol_doc, fh, indent=1)
            fh.write("\n")
    with open(out / f"{sid}.best.solution.json", "w") as fh:
        json.dump(best_doc, fh, indent=1)
        fh.write("\n")

    report_path = out / f"{sid}.report.csv"
    with open(report_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(REPORT_COLUMNS)
        for row in rows:
            wr.writerow([row[0], row[1]] + [repr(float(x)) for x in row[2:]])
        data = np.array([[float(x) for x in row[2:]] for row in rows])
        wr.writerow([sid, "mean"] + [repr(float(x)) for x in data.mean(axis=0)])
        wr.writerow([sid, "std"] + [repr(float(x)) for x in data.std(axis=0)])
    click.echo(f"best total {best_total:.4f} over {ensemble} run(s); report at {report_path}")


@main.command()
@click.argument("instance_path", type=click.Path(exists=True))
@click.argument("solution_path", type=click.Path(exists=True))
def verify(instance_path, solution_path):
    """Check a solution file and print its objective breakdown."""
    try:
        inst = load_instance(instance_path)
        sol = load_solution(inst, solution_path)
    except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        _fail_schema(f"cannot parse input: {exc}")
    ob = evaluate(inst, sol)
    click.echo(f"total={ob.total:.4f} b1={ob.b1} b2={ob.b2} b3_m={ob.b3:.1f} "
               f"b4_s={ob.b4:.1f} b5={ob.b5} b6={ob.b6}")
    report = check_feasibility(inst, sol)
    if report:
        for v in report:
            where = f" route={v.route}" if v.route is not None else ""
            at = f" node={v.node}" if v.node is not None else ""
            click.echo(f"violated constraint {v.constraint}:{where}{at} {v.detail}")
        sys.exit(1)
    click.echo("feasible")


@main.command("export-milp")
@click.argument("instance_path", type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--max-nodes", default=60, show_default=True, type=int)
def export_milp(instance_path, out_path, max_nodes):
    """Write the exact model in LP format."""
    try:
        inst = load_instance(instance_path)
    except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        _fail_schema(f"cannot read instance: {exc}")
    try:
        text = export_lp(inst, max_nodes=max_nodes)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    if out_path is None:
        out_path = str(Path(instance_path).with_suffix(".lp"))
    with open(out_path, "w") as fh:
        fh.write(text)
    click.echo(f"wrote {out_path}")


@main.command()
@click.argument("instance_path", type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--max-requests", default=8, show_default=True, type=int)
@click.option("--max-platforms", default=3, show_default=True, type=int)
def oracle(instance_path, out_path, max_requests, max_platforms):
    """Solve a tiny instance exactly by enumeration."""
    try:
        inst = load_instance(instance_path)
    except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        _fail_schema(f"cannot read instance: {exc}")
    try:
        sol, total = brute_force_solve(inst, max_requests=max_requests,
                                       max_platforms=max_platforms)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    ob = evaluate(inst, sol)
    click.echo(f"optimum total={total:.6f} b1={ob.b1} b2={ob.b2} b3_m={ob.b3:.1f} "
               f"b4_s={ob.b4:.1f} b5={ob.b5} b6={ob.b6}")
    if out_path:
        save_solution(inst, sol, out_path)
        click.echo(f"wrote {out_path}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--reports", "reports_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", default="compare.csv", type=click.Path())
def compare(manifest_path, reports_dir, out_path):
    """Aggregate run reports per scenario cell and compute deltas against the
    conventional (no service depot) baseline."""
    reports = Path(reports_dir)
    cells: dict[tuple[str, str, int], list[list[float]]] = {}
    missing = []
    with open(manifest_path) as fh:
        for rec in csv.DictReader(fh):
            key = (rec["spatial"], rec["tw"], int(rec["n_sd"]))
            rp = reports / f"{rec['scenario_id']}.report.csv"
            if not rp.exists():
                missing.append(str(rp))
                continue
            with open(rp) as rfh:
                for row in csv.DictReader(rfh):
                    if row["run"] in ("mean", "std"):
                        continue
                    cells.setdefault(key, []).append(
                        [float(row[cname]) for cname in
                         ("total", "b1", "b2", "b3_m", "b4_s", "b5", "b6")])
    if missing:
        click.echo("missing run reports:", err=True)
        for p in missing:
            click.echo(f"  {p}", err=True)
        sys.exit(2)

    def cell_mean(key):
        return np.array(cells[key]).mean(axis=0)

    with open(out_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["spatial", "tw", "n_sd", "n_runs",
                     "mean_total", "mean_b1", "mean_b2", "mean_b3_m",
                     "mean_b4_s", "mean_b5", "mean_b6", "mc_per_platform",
                     "pct_total_vs_conv", "pct_b1_vs_conv",
                     "pct_b3_vs_conv", "pct_b4_vs_conv"])
        for key in sorted(cells):
            spatial, tw, n_sd = key
            mean = cell_mean(key)
            base_key = (spatial, tw, 0)
            pct = [""] * 4
            if base_key in cells:
                base = cell_mean(base_key)
                idxs = (0, 1, 3, 4)
                pct = [repr(float((mean[i] / base[i] - 1.0) * 100.0))
                       if base[i] else "" for i in idxs]
            mc = mean[5] / mean[1] if mean[1] else 0.0
            wr.writerow([spatial, tw, n_sd, len(cells[key])]
                        + [repr(float(x)) for x in mean]
                        + [repr(float(mc))] + pct)
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
