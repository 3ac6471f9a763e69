"""Command-line front end.

Commands compose into the full pipeline:

    qlbm gen-dataset -c experiment.json
    qlbm train -c experiment.json --dataset runs/dataset-xxxx/corpus.qds
    qlbm simulate -c experiment.json --model runs/train-xxxx/model
    qlbm case -c experiment.json --model ... --case jets --force-scale 1.2
    qlbm analyze scaling --beta 0.1 --n-base 2.4e4
    qlbm plot metrics runs/simulate-xxxx/metrics.csv

Every command is deterministic given (config, seed); each run directory is
content-addressed by the configuration hash and carries the resolved config,
a file manifest, the delimited outputs and the rendered figures.

Exit codes: 0 success, 2 configuration error, 3 numerical abort.
"""
from __future__ import annotations

import csv
import functools
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import analysis, config as cfgmod, hybrid, lattice, plots
from .ansatz import save_model
from .dataset import Dataset, build_artificial, harvest, stats
from .hybrid import HybridModel, fixed_precision_study, run_case_suite, run_hybrid
from .lattice import Case, ConfigurationError, InstabilityError, LatticeConfig
from .training import TrainingAbort, history_to_csv, train

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def output_root(explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    return Path(os.environ.get("QLBM_OUTPUT_ROOT", "runs"))


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigurationError, FileNotFoundError) as exc:
            click.echo(f"configuration error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except (InstabilityError, TrainingAbort, FloatingPointError) as exc:
            click.echo(f"numerical abort: {exc}", err=True)
            sys.exit(EXIT_NUMERIC)
    return wrapper


def _load(config_path: str) -> dict:
    return cfgmod.load_config(config_path)


@click.group()
def main():
    """Lattice Boltzmann collision learning with variational circuits."""


# ---------------------------------------------------------------------------
# gen-dataset
# ---------------------------------------------------------------------------

@main.command("gen-dataset")
@click.option("--config", "-c", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None, help="output root")
@click.option("--force", is_flag=True, help="overwrite an existing run directory")
@guarded
def gen_dataset(config_path, out, force):
    """Build a collision-sample corpus (synthetic or trajectory harvest)."""
    doc = _load(config_path)
    section = doc.get("dataset")
    if section is None:
        raise ConfigurationError("config has no 'dataset' section")
    run = cfgmod.prepare_run_dir(output_root(out), "dataset", doc, force)
    if section["kind"] == "artificial":
        ds = build_artificial(cfgmod.build_artificial_spec(section))
    else:
        lat = cfgmod.build_lattice(section.get("lattice") or doc["lattice"])
        case = Case(section.get("case", doc.get("case", "tgv")))
        traj = lattice.run_reference(lat, section.get("steps", doc.get("steps", 50)),
                                     case=case, record="fields")
        ds = harvest(traj)
    limit = section.get("limit")
    if limit is not None and limit < len(ds):
        ds = ds.subset(np.arange(limit))
    files = [run / "corpus.qds"]
    ds.save(files[0])
    if len(ds):
        report = stats(ds)
        report.to_csv(run / "stats.csv")
        files.append(run / "stats.csv")
    cfgmod.write_manifest(run, "gen-dataset", doc, files)
    click.echo(f"{len(ds)} samples -> {run}")


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _make_validator(doc: dict, train_cfg, mode: str | None = None):
    """Validation hook: hybrid run against the config's lattice/case."""
    lattice_doc = doc.get("lattice")
    if lattice_doc is None or train_cfg.validate_every <= 0:
        return None
    lat = cfgmod.build_lattice(lattice_doc)
    case = Case(doc.get("case", "tgv"))
    steps = doc.get("steps", 50)
    loss_kind = train_cfg.loss.kind
    if mode is None:
        phase_aware = loss_kind in ("amp_phase", "rho") and not train_cfg.loss.nonunitary_target
        mode = hybrid.MODE_COHERENT if (phase_aware and train_cfg.model == "single") \
            else hybrid.MODE_MEASURED

    def validator(params_and_circuit):
        circuit, params = params_and_circuit
        model = HybridModel(circuit=circuit, params=params, tau=lat.tau,
                            kind=train_cfg.model, loss_kind=loss_kind,
                            nonunitary=train_cfg.loss.nonunitary_target)
        run = run_hybrid(lat, model, mode, steps, case=case)
        return run.metrics.eps_final

    return validator


@main.command("train")
@click.option("--config", "-c", "config_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
@click.option("--force", is_flag=True)
@guarded
def train_cmd(config_path, dataset_path, out, force):
    """Optimize a collision circuit on a stored corpus."""
    doc = _load(config_path)
    section = doc.get("train")
    if section is None:
        raise ConfigurationError("config has no 'train' section")
    ds = Dataset.load(dataset_path)
    tc = cfgmod.build_train(section)
    run = cfgmod.prepare_run_dir(output_root(out), "train", doc, force)

    raw_validator = _make_validator(doc, tc)
    from .ansatz import build_collision_circuit

    circuit = build_collision_circuit(tc.layers, tc.model)
    validator = (lambda p: raw_validator((circuit, p))) if raw_validator else None
    result = train(ds, tc, validator=validator)
    meta = {
        "model": tc.model,
        "layers": tc.layers,
        "seed": tc.seed,
        "tau": ds.tau,
        "loss": {
            "kind": tc.loss.kind,
            "phase_weight": tc.loss.phase_weight,
            "macro_weight": tc.loss.macro_weight,
            "macro_mode": tc.loss.macro_mode,
            "nonunitary_target": tc.loss.nonunitary_target,
        },
        "config_hash": cfgmod.config_hash(doc),
        "dataset": str(dataset_path),
        "epochs": tc.epochs,
    }
    save_model(run / "model", result.circuit, result.params, meta)
    if result.best_params is not None:
        save_model(run / "model_best", result.circuit, result.best_params,
                   {**meta, "checkpoint": "best_validation",
                    "val_error": result.best_val})
    history_to_csv(run / "history.csv", result.history)
    files = [run / "history.csv", run / "model" / "circuit.json",
             run / "model" / "params.csv", run / "model" / "meta.json"]
    if result.history:
        plots.plot_history(plots.read_csv_columns(run / "history.csv"),
                           run / "history.png")
        files.append(run / "history.png")
    cfgmod.write_manifest(run, "train", doc, files)
    click.echo(f"model -> {run / 'model'}")


# ---------------------------------------------------------------------------
# simulate / case
# ---------------------------------------------------------------------------

@main.command("simulate")
@click.option("--config", "-c", "config_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--mode", type=click.Choice(hybrid.MODES), default=None)
@click.option("--steps", type=int, default=None)
@click.option("--force-scale", type=float, default=1.0,
              help="rescale the circuit run's body force (explicit override)")
@click.option("--baseline-only", is_flag=True,
              help="identity circuit: pure linear-vs-quadratic comparison")
@click.option("--out", type=click.Path(), default=None)
@click.option("--force", is_flag=True)
@guarded
def simulate(config_path, model_path, mode, steps, force_scale, baseline_only,
             out, force):
    """Run the lockstep hybrid simulation and record error metrics."""
    doc = _load(config_path)
    lat = cfgmod.build_lattice(doc["lattice"])
    case = Case(doc.get("case", "tgv"))
    T = steps if steps is not None else doc.get("steps", 50)
    hy = doc.get("hybrid", {})
    mode = mode or hy.get("mode", "measured")
    if baseline_only:
        model = HybridModel.identity(tau=lat.tau)
    elif model_path:
        model = HybridModel.from_artifact(model_path)
    else:
        raise ConfigurationError("pass --model or --baseline-only")
    hybrid.validate_mode(model, mode)  # refuse incompatible combinations early
    run_dir = cfgmod.prepare_run_dir(output_root(out), "simulate", doc, force)
    result = run_hybrid(lat, model, mode, T, case=case,
                        force_scale=force_scale if not baseline_only else 1.0)
    files = [run_dir / "metrics.csv"]
    result.metrics.to_csv(files[0])
    lattice.save_fields(run_dir / "final_fields.qlb",
                        np.stack([result.f_ref, result.f_lin, result.f_vqc]))
    lattice.save_macro_csv(run_dir / "final_macro_vqc.csv",
                           lattice.fluid_view(result.f_vqc, None))
    files += [run_dir / "final_fields.qlb", run_dir / "final_macro_vqc.csv"]
    if T > 0:
        plots.plot_metrics(plots.read_csv_columns(files[0]), run_dir / "metrics.png",
                           title=f"{case.value}, mode={mode}")
        files.append(run_dir / "metrics.png")
    summary = {
        "eps_final": result.metrics.eps_final,
        "eps_final_lin": result.metrics.eps_final_lin,
        "eta_eps": result.metrics.eta_eps if T > 0 else None,
        "mode": mode,
        "steps": T,
    }
    with open(run_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    files.append(run_dir / "summary.json")
    cfgmod.write_manifest(run_dir, "simulate", doc, files)
    click.echo(json.dumps(summary))


@main.command("case")
@click.option("--config", "-c", "config_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--case", "case_name", type=click.Choice([c.value for c in Case]),
              default=None)
@click.option("--mode", type=click.Choice(hybrid.MODES), default=None)
@click.option("--steps", type=int, default=None)
@click.option("--force-scale", type=float, default=1.0)
@click.option("--handoff", type=int, default=None,
              help="steps simulated by the circuit at the end of a plate run")
@click.option("--out", type=click.Path(), default=None)
@click.option("--force", is_flag=True)
@guarded
def case_cmd(config_path, model_path, case_name, mode, steps, force_scale,
             handoff, out, force):
    """Produce the benchmark-case comparison report."""
    doc = _load(config_path)
    case = Case(case_name or doc.get("case", "tgv"))
    hy = doc.get("hybrid", {})
    model = HybridModel.from_artifact(model_path)
    mode = mode or hy.get("mode", "measured")
    lat = cfgmod.build_lattice(doc["lattice"]) if "lattice" in doc else None
    run_dir = cfgmod.prepare_run_dir(output_root(out), f"case-{case.value}", doc, force)
    report = run_case_suite(
        case, model, mode, config=lat,
        T=steps if steps is not None else doc.get("steps"),
        force_scale=force_scale,
        handoff=handoff if handoff is not None else hy.get("handoff", 10),
    )
    files = list(report.write_tables(run_dir))
    for name, field in report.fields.items():
        files.append(plots.save_scalar_field_csv(run_dir / f"{name}.csv", field))
        files.append(plots.plot_field(field, run_dir / f"{name}.png", title=name))
    if "decay" in report.tables:
        files.append(plots.plot_decay(
            plots.read_csv_columns(run_dir / "decay.csv"), run_dir / "decay.png"))
    if "metrics" in report.tables:
        cols = plots.read_csv_columns(run_dir / "metrics.csv")
        if "max_rel_u" in cols:
            fig_cols = {k: cols[k] for k in cols}
            files.append(plots.plot_metrics(fig_cols, run_dir / "metrics.png",
                                            title=case.value))
    with open(run_dir / "summary.json", "w") as fh:
        json.dump(report.summary, fh, indent=1, sort_keys=True)
    files.append(run_dir / "summary.json")
    cfgmod.write_manifest(run_dir, "case", doc, files)
    click.echo(json.dumps(report.summary))


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

@main.group("analyze")
def analyze():
    """Operator diagnostics, sweep experiments and scaling math."""


def _scaling_rows(beta, n_base, t_base, dim):
    report = analysis.diffusive_scaling(beta, n_base, t_base, dim)
    return analysis.scaling_report_rows(report)


@analyze.command("scaling")
@click.option("--beta", type=float, default=1.0)
@click.option("--n-base", type=float, default=2.4e4)
@click.option("--t-base", type=float, default=1e4)
@click.option("--dimensions", type=int, default=2)
@click.option("--crossover", type=float, default=None,
              help="invert the refinement limit: site count where beta1 equals this")
@click.option("--out", type=click.Path(), default=None)
@guarded
def analyze_scaling(beta, n_base, t_base, dimensions, crossover, out):
    """Diffusive-scaling report (scaled variables, costs, advantage limits)."""
    if crossover is not None:
        n = analysis.crossover_sites(crossover)
        click.echo(f"beta1 = {crossover} at n_base = {n:.6g}")
        return
    rows = _scaling_rows(beta, n_base, t_base, dimensions)
    for key, val in rows:
        click.echo(f"{key:24s} {val:.6g}")
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["quantity", "value"])
            writer.writerows(rows)


@analyze.command("nonunitarity")
@click.option("--sweep", type=click.Choice(["u", "tau"]), default="u")
@click.option("--tau", type=float, default=1.0)
@click.option("--u", type=float, default=0.05)
@click.option("--lo", type=float, default=None)
@click.option("--hi", type=float, default=None)
@click.option("--points", type=int, default=24)
@click.option("--kind", type=click.Choice(list(analysis.MAP_KINDS)), default="effective")
@click.option("--out", type=click.Path(), required=True)
@guarded
def analyze_nonunitarity(sweep, tau, u, lo, hi, points, kind, out):
    """Singular-value diagnostics of the frozen collision maps."""
    if sweep == "u":
        grid = np.linspace(lo if lo is not None else 0.01,
                           hi if hi is not None else 0.2, points)
        rows = []
        for val in grid:
            nu = analysis.nonunitarity(analysis.build_frozen_map([val, 0.0], tau, kind))
            rows.append({"u": val, "sigma_max": nu.sigma_max, "metric": nu.metric})
        xcol = "u"
    else:
        grid = np.linspace(lo if lo is not None else 0.6,
                           hi if hi is not None else 2.0, points)
        rows = []
        for val in grid:
            nu = analysis.nonunitarity(
                analysis.build_frozen_map([u, 0.0], val, "effective_omega"))
            rows.append({"tau": val, "sigma_max": nu.sigma_max, "metric": nu.metric})
        xcol = "tau"
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(rows[0].keys())
        for r in rows:
            writer.writerow([repr(float(v)) for v in r.values()])
    plots.plot_nonunitarity(plots.read_csv_columns(path),
                            path.with_suffix(".png"), x=xcol)
    click.echo(f"{len(rows)} rows -> {path}")


@analyze.command("fit")
@click.option("--csv", "csv_path", required=True, type=click.Path(exists=True))
@click.option("--x", default="u")
@click.option("--y", default="pred_mse")
@guarded
def analyze_fit(csv_path, x, y):
    """Exponential-quadratic fit of a sweep column, reported in log space."""
    cols = plots.read_csv_columns(csv_path)
    fit = analysis.fit_exp_quadratic(cols[x], cols[y])
    click.echo(json.dumps({"a": fit.a, "b": fit.b, "c": fit.c, "r2": fit.r2}))


@analyze.command("precision")
@click.option("--config", "-c", "config_path", required=True, type=click.Path(exists=True))
@click.option("--digits-u", type=float, required=True)
@click.option("--digits-f", type=float, required=True)
@click.option("--steps", type=int, default=100)
@click.option("--out", type=click.Path(), default=None)
@click.option("--force", is_flag=True)
@guarded
def analyze_precision(config_path, digits_u, digits_f, steps, out, force):
    """Fixed-register study: quantized velocity/nonlinear registers vs exact."""
    doc = _load(config_path)
    lat = cfgmod.build_lattice(doc["lattice"])
    run_dir = cfgmod.prepare_run_dir(output_root(out), "precision", doc, force)
    report = fixed_precision_study(lat, digits_u, digits_f, T=steps)
    files = [plots.save_scalar_field_csv(run_dir / "rel_err_field.csv",
                                         report.rel_err_field)]
    files.append(plots.plot_field(report.rel_err_field, run_dir / "rel_err_field.png",
                                  title=f"u:{digits_u} f:{digits_f} digits"))
    summary = {"digits_u": digits_u, "digits_f": digits_f,
               "max_rel_u": report.max_rel_u, "mean_rel_u": report.mean_rel_u}
    with open(run_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    files.append(run_dir / "summary.json")
    cfgmod.write_manifest(run_dir, "analyze-precision", doc, files)
    click.echo(json.dumps(summary))


def _sweep_point(doc: dict, cache_root: Path, overrides: dict) -> dict:
    """Train/evaluate one sweep point with content-addressed caching."""
    from .ansatz import build_collision_circuit
    from .training import make_batch
    from . import qsim
    from .ansatz import apply_circuit

    merged = json.loads(json.dumps(doc))
    merged.setdefault("sweep_point", {}).update(overrides)
    key = cfgmod.config_hash(merged)
    cache = cache_root / key
    if (cache / "point.json").exists():
        with open(cache / "point.json") as fh:
            return json.load(fh)

    lat_doc = dict(doc.get("lattice", {"nx": 32, "ny": 32}))
    lat_doc["u_max"] = overrides.get("u", lat_doc.get("u_max", 0.05))
    lat_doc["tau"] = overrides.get("tau", lat_doc.get("tau", 1.0))
    lat = cfgmod.build_lattice(lat_doc)
    case = Case(doc.get("case", "tgv"))
    traj = lattice.run_reference(lat, doc.get("dataset", {}).get("steps", 20),
                                 case=case, record="fields")
    ds = harvest(traj)
    limit = doc.get("dataset", {}).get("limit")
    if limit:
        ds = ds.subset(np.arange(min(limit, len(ds))))

    tc = cfgmod.build_train(dict(doc.get("train", {})))
    if "target" in overrides and overrides["target"] == "lin":
        tc.input_field, tc.target_field = "str", "lin"
    if "macro_weight" in overrides:
        from dataclasses import replace
        tc.loss = replace(tc.loss, macro_weight=overrides["macro_weight"],
                          kind="amp_phase")
    result = train(ds, tc)

    psi = qsim.encode_channels(
        ds.f_lin if tc.input_field == "lin" else ds.f_str)
    target = ds.f_ref if tc.target_field == "ref" else ds.f_lin
    base = ds.f_lin if tc.input_field == "lin" else ds.f_str
    out = apply_circuit(result.circuit, result.params, psi)
    f_pred = np.abs(out[:, qsim.CHANNEL_BASIS]) ** 2 * base.sum(1)[:, None]
    pred_mse = float(((f_pred - target) ** 2).mean())
    base_mse = float(((base - target) ** 2).mean())
    amp_hist = [row["amp_mse"] for row in result.history]

    model = HybridModel(circuit=result.circuit, params=result.params, tau=lat.tau,
                        kind=tc.model, loss_kind=tc.loss.kind,
                        nonunitary=tc.loss.nonunitary_target)
    val_cfg = cfgmod.build_lattice({**lat_doc, "nx": doc.get("steps_nx", 64),
                                    "ny": doc.get("steps_nx", 64)})
    run = run_hybrid(val_cfg, model, hybrid.MODE_MEASURED, doc.get("steps", 50),
                     case=case)
    point = {
        "pred_mse": pred_mse,
        "base_mse": base_mse,
        "mse_max": float(np.max(amp_hist)),
        "mse_median": float(np.median(amp_hist)),
        "mse_min": float(np.min(amp_hist)),
        "vel_rel_err": run.metrics.eps_final,
        "vel_rel_err_lin": run.metrics.eps_final_lin,
    }
    cache.mkdir(parents=True, exist_ok=True)
    save_model(cache / "model", result.circuit, result.params,
               {"model": tc.model, "layers": tc.layers, "tau": lat.tau,
                "seed": tc.seed, "loss": {"kind": tc.loss.kind},
                "config_hash": key})
    with open(cache / "point.json", "w") as fh:
        json.dump(point, fh, indent=1, sort_keys=True)
    return point


@analyze.command("velocity-sweep")
@click.option("--config", "-c", "config_path", required=True, type=click.Path(exists=True))
@click.option("--values", required=True, help="comma-separated velocities")
@click.option("--target", type=click.Choice(["ref", "lin"]), default="ref")
@click.option("--out", type=click.Path(), default=None)
@click.option("--force", is_flag=True)
@guarded
def analyze_velocity_sweep(config_path, values, target, out, force):
    """Per-velocity model quality (trains one model per grid point)."""
    doc = _load(config_path)
    grid = [float(v) for v in values.split(",")]
    run_dir = cfgmod.prepare_run_dir(output_root(out), "velocity-sweep", doc, force)
    cache = output_root(out) / "cache"

    def run_point(u, tgt):
        return _sweep_point(doc, cache, {"u": u, "target": tgt})

    rows = analysis.velocity_sweep(run_point, grid, target=target,
                                   csv_path=run_dir / "sweep.csv")
    cols = plots.read_csv_columns(run_dir / "sweep.csv")
    fit = None
    try:
        fit = analysis.fit_exp_quadratic(cols["u"], cols["pred_mse"])
    except ValueError:
        pass
    files = [run_dir / "sweep.csv",
             plots.plot_sweep(cols, run_dir / "sweep.png", fit=fit)]
    cfgmod.write_manifest(run_dir, "velocity-sweep", doc, files)
    click.echo(f"{len(rows)} points -> {run_dir}")


@analyze.command("tau-sweep")
@click.option("--config", "-c", "config_path", required=True, type=click.Path(exists=True))
@click.option("--values", required=True, help="comma-separated relaxation times")
@click.option("--u", type=float, default=0.05)
@click.option("--out", type=click.Path(), default=None)
@click.option("--force", is_flag=True)
@guarded
def analyze_tau_sweep(config_path, values, u, out, force):
    """Per-tau model quality plus the omega-form non-unitarity."""
    doc = _load(config_path)
    grid = [float(v) for v in values.split(",")]
    run_dir = cfgmod.prepare_run_dir(output_root(out), "tau-sweep", doc, force)
    cache = output_root(out) / "cache"

    def run_point(tau):
        return _sweep_point(doc, cache, {"tau": tau, "u": u})

    analysis.tau_sweep(run_point, grid, u=u, csv_path=run_dir / "sweep.csv")
    files = [run_dir / "sweep.csv"]
    cfgmod.write_manifest(run_dir, "tau-sweep", doc, files)
    click.echo(f"{len(grid)} points -> {run_dir}")


@analyze.command("lambda-sweep")
@click.option("--config", "-c", "config_path", required=True, type=click.Path(exists=True))
@click.option("--values", required=True, help="comma-separated macroscopic weights")
@click.option("--out", type=click.Path(), default=None)
@click.option("--force", is_flag=True)
@guarded
def analyze_lambda_sweep(config_path, values, out, force):
    """Macroscopic-penalty sweep: accuracy trade-off against the weight."""
    doc = _load(config_path)
    grid = [float(v) for v in values.split(",")]
    run_dir = cfgmod.prepare_run_dir(output_root(out), "lambda-sweep", doc, force)
    cache = output_root(out) / "cache"

    def run_point(lam):
        return _sweep_point(doc, cache, {"macro_weight": lam})

    analysis.lambda_u_sweep(run_point, grid, csv_path=run_dir / "sweep.csv")
    files = [run_dir / "sweep.csv"]
    cfgmod.write_manifest(run_dir, "lambda-sweep", doc, files)
    click.echo(f"{len(grid)} points -> {run_dir}")


# ---------------------------------------------------------------------------
# plot / scaling
# ---------------------------------------------------------------------------

PLOT_KINDS = {
    "metrics": plots.plot_metrics,
    "decay": plots.plot_decay,
    "history": plots.plot_history,
    "sweep": plots.plot_sweep,
    "nonunitarity": plots.plot_nonunitarity,
    "field": plots.plot_field,
    "tradeoff": plots.plot_tradeoff,
}


@main.command("plot")
@click.argument("kind")
@click.argument("csv_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
@guarded
def plot_cmd(kind, csv_path, out):
    """Render a figure from a delimited report."""
    if kind == "scaling":
        path = plots.plot_scaling(out or Path(csv_path).with_suffix(".png"))
        click.echo(str(path))
        return
    if kind not in PLOT_KINDS:
        raise ConfigurationError(
            f"unknown plot kind {kind!r}; available: "
            + ", ".join(sorted(PLOT_KINDS) + ["scaling"]))
    cols = plots.read_csv_columns(csv_path)
    out = out or str(Path(csv_path).with_suffix(".png"))
    path = PLOT_KINDS[kind](cols, out)
    click.echo(str(path))


@main.command("scaling")
@click.option("--beta", type=float, default=1.0)
@click.option("--n-base", type=float, default=2.4e4)
@click.option("--t-base", type=float, default=1e4)
@click.option("--dimensions", type=int, default=2)
@click.option("--crossover", type=float, default=None)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
@guarded
def scaling_cmd(ctx, **kwargs):
    """Shortcut for `analyze scaling`."""
    ctx.forward(analyze_scaling)


if __name__ == "__main__":
    main()
