"""Command-line front end for datasets, training, search, and experiments."""

from __future__ import annotations

import functools
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import __version__
from .config import ExperimentConfig, load_config
from .harness import (
    RunReport,
    compare as compare_reports,
    emit_traces,
    load_candidates,
    load_model,
    run_experiment,
    save_candidates,
    save_model,
    sweep as run_sweep,
    theory_report,
    write_trace_csv,
)
from .search import candidate_sharpness, evaluate_candidates, grad_ascent_search, reinforce_search
from .sharpness import first_order_sharpness
from .tasks import generate_offline_dataset, load_dataset, make_task, save_dataset
from .trainers import make_trainer


def friendly_errors(fn):
    """Turn domain errors into a structured error line and nonzero exit."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, OSError, RuntimeError) as exc:
            raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc

    return wrapper


def _load_cfg(config_path: str | None) -> ExperimentConfig:
    if config_path is None:
        return ExperimentConfig()
    return load_config(config_path)


def _apply_seed_overrides(cfg: ExperimentConfig, seeds: str | None, master_seed: int | None):
    if master_seed is not None:
        cfg = replace(cfg, master_seed=master_seed, seeds=())
    if seeds is not None:
        parts = [p for p in seeds.replace(" ", "").split(",") if p]
        if len(parts) == 1:
            cfg = replace(cfg, num_seeds=int(parts[0]), seeds=())
        else:
            cfg = replace(cfg, seeds=tuple(int(p) for p in parts))
    return cfg


@click.group()
@click.version_option(__version__)
def main():
    """Sharpness-capped surrogate training and design search."""


@main.command("gen-data")
@click.option("--task", "task_tag", required=True, help="quad_bowl | neg_ackley | neg_rastrigin | neg_branin")
@click.option("--dim", type=int, default=None)
@click.option("--n-pool", type=int, default=5000, show_default=True)
@click.option("--keep-quantile", type=float, default=0.4, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="dataset CSV path")
@friendly_errors
def gen_data(task_tag, dim, n_pool, keep_quantile, seed, out):
    """Generate a truncated offline dataset and its metadata sidecar."""
    task = make_task(task_tag, dim)
    data = generate_offline_dataset(task, n_pool, keep_quantile, seed)
    path = save_dataset(data, task, out)
    click.echo(f"wrote {data.n} rows to {path} (pool quantile {data.pool_quantile_value:.6g})")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="model JSON path")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), default=None)
@click.option("--seed", type=int, default=None, help="override the trainer seed")
@friendly_errors
def train(config_path, data_path, out, trace_path, seed):
    """Train one surrogate on a stored dataset."""
    cfg = _load_cfg(config_path)
    data, task = load_dataset(data_path)
    tcfg = cfg.train if seed is None else replace(cfg.train, seed=seed)
    model, trace = make_trainer(cfg.trainer, cfg.penalty_weight)(data, cfg.mlp_spec(task.dim), tcfg)
    save_model(model, out)
    if trace_path is not None:
        write_trace_csv(trace, tcfg.rho, trace_path)
    click.echo(
        f"trained {cfg.trainer} for {tcfg.iterations} iterations; "
        f"final loss {trace.loss[-1]:.6g}, final grad norm {trace.grad_norm[-1]:.6g}"
    )


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--model", "model_paths", type=click.Path(exists=True, dir_okay=False), multiple=True, required=True)
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="candidates CSV path")
@click.option("--seed", type=int, default=None, help="override the search seed")
@friendly_errors
def search(config_path, model_paths, data_path, out, seed):
    """Search stored surrogates for design candidates."""
    cfg = _load_cfg(config_path)
    data, task = load_dataset(data_path)
    scfg = cfg.search if seed is None else replace(cfg.search, seed=seed)
    if scfg.step_size is None:
        scfg = replace(scfg, step_size=0.01 * task.diagonal)
    if scfg.sigma_init is None:
        scfg = replace(scfg, sigma_init=0.05 * task.diagonal)
    models = [load_model(p) for p in model_paths]
    if scfg.method == "reinforce":
        cands = reinforce_search(models[0], data, scfg, task.bounds)
    else:
        cands = grad_ascent_search(models, data, scfg, task.bounds)
    save_candidates(cands, out)
    click.echo(f"wrote {cands.n} candidates to {out}")


@main.command("eval")
@click.option("--candidates", "cand_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="dataset CSV whose sidecar names the task")
@click.option("--levels", default="50,80,100", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="optional CSV output")
@friendly_errors
def eval_cmd(cand_path, data_path, levels, out):
    """Oracle-score stored candidates and print percentile levels."""
    _, task = load_dataset(data_path)
    cands = load_candidates(cand_path)
    level_tuple = tuple(int(p) for p in levels.split(","))
    report = evaluate_candidates(cands, task, level_tuple)
    for lv, norm, raw in zip(report.levels, report.normalized, report.raw):
        click.echo(f"p{lv}: normalized {norm:.6g} raw {raw:.6g}")
    if out is not None:
        with open(out, "w") as fh:
            fh.write("level,normalized,raw\n")
            for lv, norm, raw in zip(report.levels, report.normalized, report.raw):
                fh.write(f"{lv},{norm!r},{raw!r}\n")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--seeds", default=None, help="seed count or comma-separated list")
@click.option("--master-seed", type=int, default=None)
@friendly_errors
def run(config_path, out, seeds, master_seed):
    """Full pipeline: per seed, generate data, train, search, evaluate."""
    cfg = _apply_seed_overrides(_load_cfg(config_path), seeds, master_seed)
    report = run_experiment(cfg, out)
    ok = len(report.ok_rows())
    click.echo(f"{report.task_name}: {ok}/{len(report.rows)} seeds ok")
    for lv, stats in report.aggregate().items():
        click.echo(f"p{lv}: {stats['mean']:.4f} +- {stats['std']:.4f} (median {stats['median']:.4f})")
    click.echo(f"report written to {Path(out) / 'report.json'}")


@main.command()
@click.option("--base", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--treated", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="optional gain CSV")
@friendly_errors
def compare(base, treated, out):
    """Percentage-point gains of a treated report over a base report."""
    table = compare_reports(RunReport.load(base), RunReport.load(treated))
    click.echo(table.format())
    if out is not None:
        table.to_csv(out)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--param", type=click.Choice(["epsilon", "eta_lambda", "rho", "r"]), required=True)
@click.option("--values", required=True, help="comma-separated values")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--seeds", default=None)
@click.option("--master-seed", type=int, default=None)
@friendly_errors
def sweep(config_path, param, values, out, seeds, master_seed):
    """Sweep one trainer parameter; gains are against an ERM baseline."""
    cfg = _apply_seed_overrides(_load_cfg(config_path), seeds, master_seed)
    value_list = [float(v) for v in values.split(",")]
    result = run_sweep(cfg, param, value_list, out)
    for value, table in zip(result.values, result.gains):
        top = table.rows[-1]
        click.echo(f"{param}={value:g}: p{top.level} gain {top.gain_points:+.2f}% (median {top.gain_points_median:+.2f}%)")
    click.echo(f"sweep table written to {Path(out) / 'sweep.csv'}")


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--candidates", "cand_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--rho", type=float, default=0.05, show_default=True)
@friendly_errors
def sharpness(model_path, data_path, cand_path, rho):
    """Linearized sharpness of a stored model on a dataset or candidate set."""
    if (data_path is None) == (cand_path is None):
        raise click.ClickException("provide exactly one of --data or --candidates")
    model = load_model(model_path)
    if cand_path is not None:
        est = candidate_sharpness(model, load_candidates(cand_path), rho)
        where = "candidates"
    else:
        data, _ = load_dataset(data_path)
        est = first_order_sharpness(model, data.X, rho)
        where = "dataset"
    click.echo(f"grad_norm={est.grad_norm:.6g} rho={est.rho:g} sharpness={est.estimate:.6g} ({where})")


@main.command("theory-check")
@click.option("--dim", type=int, default=8, show_default=True)
@click.option("--gamma", type=float, default=2.0, show_default=True)
@click.option("--tau", type=float, default=1.5, show_default=True)
@click.option("--samples", type=int, default=500, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@friendly_errors
def theory_check(dim, gamma, tau, samples, seed):
    """Check the positive-curvature construction and its boundedness bound."""
    text, rep = theory_report(dim=dim, gamma=gamma, tau=tau, samples=samples, seed=seed)
    click.echo(text)
    if not rep.passed:
        sys.exit(1)


@main.command()
@click.option("--report", "report_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@friendly_errors
def traces(report_path, out):
    """Re-emit per-seed training trace CSVs from a stored run report."""
    paths = emit_traces(RunReport.load(report_path), out)
    click.echo(f"wrote {len(paths)} trace files under {out}")


if __name__ == "__main__":
    main()
