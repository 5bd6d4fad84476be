"""Multi-seed experiment pipelines, reports, gain tables, and sweeps.

One experiment = one config = for each derived seed: generate the offline
dataset, train the surrogate(s), search for candidates, score them with
the oracle, and record candidate sharpness plus training wall time. All
randomness flows from the config's master seed, so every output file is
reproducible from the config alone. Per-seed failures are caught and kept
in the report as failure rows rather than aborting the run.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import mean, median, pstdev

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_from_stored
from .errors import ConfigError
from .mlp import Surrogate
from .quadratic import ConstructionReport, QuadraticSurrogate, check_construction
from .search import (
    CandidateSet,
    SearchConfig,
    candidate_sharpness,
    evaluate_candidates,
    grad_ascent_search,
    reinforce_search,
)
from .seeds import derive
from .tasks import SyntheticTask, generate_offline_dataset, make_task
from .trainers import IgniteConfig, TrainTrace, make_trainer

TRACE_COLUMNS = ("iter", "loss", "grad_norm", "rho_times_grad_norm", "lambda", "constraint")
SWEEPABLE = ("epsilon", "eta_lambda", "rho", "r")


def save_model(model: Surrogate, path: str | Path) -> Path:
    """Persist a surrogate as JSON; float repr keeps the params exact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "spec": {
            "input_dim": model.spec.input_dim,
            "hidden_widths": list(model.spec.hidden_widths),
            "hidden_activation": model.spec.hidden_activation,
            "output_activation": model.spec.output_activation,
        },
        "params": [float(v) for v in model.params],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
    return path


def load_model(path: str | Path) -> Surrogate:
    with open(path) as fh:
        payload = json.load(fh)
    from .mlp import MlpSpec

    spec = MlpSpec(
        input_dim=payload["spec"]["input_dim"],
        hidden_widths=tuple(payload["spec"]["hidden_widths"]),
        hidden_activation=payload["spec"]["hidden_activation"],
        output_activation=payload["spec"]["output_activation"],
    )
    return Surrogate(spec, np.asarray(payload["params"], dtype=np.float64))


def save_candidates(c: CandidateSet, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dim = c.designs.shape[1]
    cols = [f"x_{i}" for i in range(dim)] + ["surrogate_score"]
    if c.oracle_scores is not None:
        cols.append("oracle_score")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(c.n):
            cells = [repr(float(v)) for v in c.designs[i]] + [repr(float(c.surrogate_scores[i]))]
            if c.oracle_scores is not None:
                cells.append(repr(float(c.oracle_scores[i])))
            fh.write(",".join(cells) + "\n")
    return path


def load_candidates(path: str | Path) -> CandidateSet:
    path = Path(path)
    header = open(path).readline().strip().split(",")
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    has_oracle = header[-1] == "oracle_score"
    dim = len(header) - 1 - (1 if has_oracle else 0)
    return CandidateSet(
        designs=raw[:, :dim],
        surrogate_scores=raw[:, dim],
        oracle_scores=raw[:, dim + 1] if has_oracle else None,
    )


@dataclass
class SeedRow:
    """Outcome of one seed of an experiment."""

    seed_index: int
    seed: int
    normalized: tuple[float, ...] = ()
    raw: tuple[float, ...] = ()
    sharpness: float = float("nan")
    train_seconds: float = float("nan")
    train_iterations: int = 0
    trace_files: tuple[str, ...] = ()
    failed: bool = False
    error: str | None = None


@dataclass
class RunReport:
    """Per-seed rows plus aggregates for one experiment config."""

    config: dict
    task_name: str
    levels: tuple[int, ...]
    rows: list[SeedRow]
    version: str = __version__

    def ok_rows(self) -> list[SeedRow]:
        return [r for r in self.rows if not r.failed]

    def aggregate(self) -> dict[int, dict[str, float]]:
        rows = self.ok_rows()
        out = {}
        for i, level in enumerate(self.levels):
            vals = [r.normalized[i] for r in rows]
            out[level] = {
                "mean": mean(vals),
                "std": pstdev(vals) if len(vals) > 1 else 0.0,
                "median": median(vals),
            }
        return out

    def mean_train_seconds(self) -> float:
        return mean(r.train_seconds for r in self.ok_rows())

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "task": self.task_name,
            "levels": list(self.levels),
            "config": self.config,
            "rows": [
                {
                    "seed_index": r.seed_index,
                    "seed": r.seed,
                    "normalized": list(r.normalized),
                    "raw": list(r.raw),
                    "sharpness": r.sharpness,
                    "train_seconds": r.train_seconds,
                    "train_iterations": r.train_iterations,
                    "trace_files": list(r.trace_files),
                    "failed": r.failed,
                    "error": r.error,
                }
                for r in self.rows
            ],
            "aggregate": {str(k): v for k, v in self.aggregate().items()},
        }

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
        return path

    @classmethod
    def load(cls, path: str | Path) -> "RunReport":
        with open(path) as fh:
            data = json.load(fh)
        rows = [
            SeedRow(
                seed_index=r["seed_index"],
                seed=r["seed"],
                normalized=tuple(r["normalized"]),
                raw=tuple(r["raw"]),
                sharpness=r["sharpness"],
                train_seconds=r["train_seconds"],
                train_iterations=r["train_iterations"],
                trace_files=tuple(r.get("trace_files", ())),
                failed=r["failed"],
                error=r["error"],
            )
            for r in data["rows"]
        ]
        report = cls(
            config=data["config"],
            task_name=data["task"],
            levels=tuple(data["levels"]),
            rows=rows,
            version=data["version"],
        )
        stored = data["aggregate"]
        fresh = report.aggregate()
        for level, stats in fresh.items():
            kept = stored.get(str(level))
            if kept is None or any(abs(kept[k] - stats[k]) > 1e-12 for k in stats):
                raise ValueError(f"stored aggregate for level {level} does not match per-seed rows")
        return report


def _resolve_search(cfg: ExperimentConfig, task: SyntheticTask) -> SearchConfig:
    """Pin the diagonal-relative defaults to concrete values for the report."""
    search = cfg.search
    if search.step_size is None:
        search = replace(search, step_size=0.01 * task.diagonal)
    if search.sigma_init is None:
        search = replace(search, sigma_init=0.05 * task.diagonal)
    return search


def _train_models(cfg, task, data, train_seed):
    trainer = make_trainer(cfg.trainer, cfg.penalty_weight)
    spec = cfg.mlp_spec(task.dim)
    n_models = cfg.search.ensemble_size if cfg.search.method in ("ens_mean", "ens_min") else 1
    models: list[Surrogate] = []
    traces: list[TrainTrace] = []
    start = time.perf_counter()
    for m in range(n_models):
        seed = train_seed if n_models == 1 else derive(train_seed, m)
        model, trace = trainer(data, spec, replace(cfg.train, seed=seed))
        models.append(model)
        traces.append(trace)
    seconds = time.perf_counter() - start
    return models, traces, seconds


def run_seed(cfg: ExperimentConfig, task: SyntheticTask, seed: int, seed_index: int):
    """One full generate/train/search/evaluate pass; returns (row, traces, candidates)."""
    data = generate_offline_dataset(task, cfg.n_pool, cfg.keep_quantile, derive(seed, 0))
    models, traces, seconds = _train_models(cfg, task, data, derive(seed, 1))
    search = replace(_resolve_search(cfg, task), seed=derive(seed, 2))
    if search.method == "reinforce":
        cands = reinforce_search(models[0], data, search, task.bounds)
    else:
        cands = grad_ascent_search(models, data, search, task.bounds)
    report = evaluate_candidates(cands, task, cfg.levels, seed=seed_index)
    sharp = mean(
        candidate_sharpness(m, cands, cfg.train.rho).estimate for m in models
    )
    row = SeedRow(
        seed_index=seed_index,
        seed=seed,
        normalized=report.normalized,
        raw=report.raw,
        sharpness=sharp,
        train_seconds=seconds,
        train_iterations=cfg.train.iterations * len(models),
    )
    return row, traces, cands


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunReport:
    """Run every seed of the config; write report.json/report.csv/traces under out_dir."""
    task = make_task(cfg.task, cfg.dim)
    resolved = replace(cfg, search=_resolve_search(cfg, task), seeds=cfg.resolved_seeds())
    rows: list[SeedRow] = []
    all_traces: list[list[TrainTrace]] = []
    for idx, seed in enumerate(resolved.seeds):
        try:
            row, traces, _ = run_seed(resolved, task, seed, idx)
        except Exception as exc:  # per-seed failure keeps the rest of the run alive
            row = SeedRow(seed_index=idx, seed=seed, failed=True, error=f"{type(exc).__name__}: {exc}")
            traces = []
        rows.append(row)
        all_traces.append(traces)
    report = RunReport(
        config=resolved.to_dict(), task_name=task.name, levels=resolved.levels, rows=rows
    )
    if not report.ok_rows():
        raise RuntimeError(f"every seed failed; first error: {rows[0].error}")
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        trace_dir = out_dir / "traces"
        for row, traces in zip(rows, all_traces):
            names = []
            for m, trace in enumerate(traces):
                suffix = f"_m{m}" if len(traces) > 1 else ""
                name = f"seed_{row.seed_index:03d}{suffix}.csv"
                write_trace_csv(trace, resolved.train.rho, trace_dir / name)
                names.append(f"traces/{name}")
            row.trace_files = tuple(names)
        report.save(out_dir / "report.json")
        _write_report_csv(report, out_dir / "report.csv")
    return report


def _write_report_csv(report: RunReport, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    level_cols = [f"norm_p{lv}" for lv in report.levels] + [f"raw_p{lv}" for lv in report.levels]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["seed_index", "seed", *level_cols, "sharpness", "train_seconds", "failed"]) + "\n")
        for r in report.rows:
            if r.failed:
                cells = [str(r.seed_index), str(r.seed)] + [""] * (len(level_cols) + 2) + ["true"]
            else:
                cells = (
                    [str(r.seed_index), str(r.seed)]
                    + [repr(v) for v in r.normalized]
                    + [repr(v) for v in r.raw]
                    + [repr(r.sharpness), repr(r.train_seconds), "false"]
                )
            fh.write(",".join(cells) + "\n")
    return path


def write_trace_csv(trace: TrainTrace, rho: float, path: str | Path) -> Path:
    """Trace CSV with the fixed (iter, loss, grad_norm, ...) schema."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for i in range(len(trace)):
            fh.write(
                ",".join(
                    [
                        str(int(trace.iteration[i])),
                        repr(float(trace.loss[i])),
                        repr(float(trace.grad_norm[i])),
                        repr(float(rho * trace.grad_norm[i])),
                        repr(float(trace.lam[i])),
                        repr(float(trace.constraint[i])),
                    ]
                )
                + "\n"
            )
    return path


def emit_traces(report: RunReport, out_dir: str | Path) -> list[Path]:
    """Recompute and write per-seed trace CSVs from a report's stored config.

    Training is deterministic given the stored resolved config, so the
    traces come out bitwise identical to the original run's.
    """
    cfg = config_from_stored(report.config)
    task = make_task(cfg.task, cfg.dim)
    out_dir = Path(out_dir)
    paths = []
    for row in report.rows:
        if row.failed:
            continue
        data = generate_offline_dataset(task, cfg.n_pool, cfg.keep_quantile, derive(row.seed, 0))
        _, traces, _ = _train_models(cfg, task, data, derive(row.seed, 1))
        for m, trace in enumerate(traces):
            suffix = f"_m{m}" if len(traces) > 1 else ""
            paths.append(
                write_trace_csv(trace, cfg.train.rho, out_dir / f"seed_{row.seed_index:03d}{suffix}.csv")
            )
    return paths


@dataclass(frozen=True)
class GainRow:
    level: int
    base_mean: float
    treated_mean: float
    gain_points: float
    base_median: float
    treated_median: float
    gain_points_median: float


@dataclass(frozen=True)
class GainTable:
    """Percentage-point gains of a treated run over a base run, per level."""

    task: str
    rows: tuple[GainRow, ...]
    train_time_ratio: float

    def format(self) -> str:
        lines = [f"task: {self.task}", "level  base          treated       gain"]
        for r in self.rows:
            lines.append(
                f"p{r.level:<5d}{r.base_mean:.3f}        {r.treated_mean:.3f}        {r.gain_points:+.1f}%"
            )
        lines.append(f"train-time ratio (treated/base): {self.train_time_ratio:.2f}x")
        return "\n".join(lines)

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write("level,base_mean,treated_mean,gain_points,base_median,treated_median,gain_points_median\n")
            for r in self.rows:
                fh.write(
                    f"{r.level},{r.base_mean!r},{r.treated_mean!r},{r.gain_points!r},"
                    f"{r.base_median!r},{r.treated_median!r},{r.gain_points_median!r}\n"
                )
        return path


def compare(base: RunReport, treated: RunReport) -> GainTable:
    """Gains in percentage points of normalized score, level by level."""
    if base.task_name != treated.task_name:
        raise ValueError(f"task mismatch: {base.task_name} vs {treated.task_name}")
    if base.levels != treated.levels:
        raise ValueError(f"level mismatch: {base.levels} vs {treated.levels}")
    if len(base.ok_rows()) != len(treated.ok_rows()):
        raise ValueError("seed-count mismatch between reports")
    base_agg, treated_agg = base.aggregate(), treated.aggregate()
    rows = tuple(
        GainRow(
            level=lv,
            base_mean=base_agg[lv]["mean"],
            treated_mean=treated_agg[lv]["mean"],
            gain_points=100.0 * (treated_agg[lv]["mean"] - base_agg[lv]["mean"]),
            base_median=base_agg[lv]["median"],
            treated_median=treated_agg[lv]["median"],
            gain_points_median=100.0 * (treated_agg[lv]["median"] - base_agg[lv]["median"]),
        )
        for lv in base.levels
    )
    ratio = treated.mean_train_seconds() / base.mean_train_seconds()
    return GainTable(task=base.task_name, rows=rows, train_time_ratio=ratio)


@dataclass(frozen=True)
class SweepResult:
    parameter: str
    values: tuple[float, ...]
    baseline: RunReport
    runs: tuple[RunReport, ...]
    gains: tuple[GainTable, ...]

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(f"{self.parameter},level,base_mean,treated_mean,gain_points,gain_points_median\n")
            for value, table in zip(self.values, self.gains):
                for r in table.rows:
                    fh.write(
                        f"{value!r},{r.level},{r.base_mean!r},{r.treated_mean!r},"
                        f"{r.gain_points!r},{r.gain_points_median!r}\n"
                    )
        return path


def sweep(
    cfg: ExperimentConfig,
    parameter: str,
    values: list[float],
    out_dir: str | Path | None = None,
) -> SweepResult:
    """Run the config once per parameter value; gains are against an ERM baseline.

    The baseline shares everything with the sweep runs (task, data seeds,
    surrogate, search) except the trainer, which is plain ERM.
    """
    if parameter not in SWEEPABLE:
        raise ConfigError("sweep.parameter", f"must be one of {SWEEPABLE}, got {parameter!r}")
    if len(values) < 2:
        raise ConfigError("sweep.values", f"need at least 2 values, got {len(values)}")
    if cfg.trainer == "erm":
        raise ConfigError("trainer.kind", "sweeping a trainer parameter requires a non-erm trainer")
    base_dir = None if out_dir is None else Path(out_dir) / "baseline_erm"
    baseline = run_experiment(replace(cfg, trainer="erm"), base_dir)
    runs = []
    gains = []
    for value in values:
        run_cfg = replace(cfg, train=replace(cfg.train, **{parameter: value}))
        run_dir = None if out_dir is None else Path(out_dir) / f"{parameter}_{value:g}"
        report = run_experiment(run_cfg, run_dir)
        runs.append(report)
        gains.append(compare(baseline, report))
    result = SweepResult(
        parameter=parameter,
        values=tuple(values),
        baseline=baseline,
        runs=tuple(runs),
        gains=tuple(gains),
    )
    if out_dir is not None:
        result.to_csv(Path(out_dir) / "sweep.csv")
    return result


def theory_report(
    dim: int = 8,
    gamma: float = 2.0,
    tau: float = 1.5,
    samples: int = 500,
    seed: int = 0,
) -> tuple[str, ConstructionReport]:
    """Human-readable pass/fail report for the quadratic-construction checks."""
    rng = np.random.default_rng(seed)
    q = QuadraticSurrogate(
        a_diag=rng.uniform(0.2, 0.8, dim),
        mean_vec=rng.uniform(-0.5, 0.5, dim),
        gamma=gamma,
        tau=tau,
    )
    rep = check_construction(q, samples_in_ball=samples, seed=derive(seed, 1))
    lines = [
        "quadratic construction check",
        f"  dim={rep.dim} gamma={rep.gamma:g} tau={rep.tau:g} samples={rep.samples}",
        f"  lambda_min={rep.lambda_min:.6g} (positive: {'yes' if rep.curvature_positive else 'NO'})",
        f"  lambda_max={rep.lambda_max:.6g}",
        f"  max |value| on ball={rep.max_abs_value:.6g} bound={rep.bound_value:.6g}"
        f" (respected: {'yes' if rep.bound_respected else 'NO'})",
        f"  degenerate: {'yes' if rep.degenerate else 'no'}",
        f"  overall: {'PASS' if rep.passed else 'FAIL'}",
    ]
    return "\n".join(lines), rep
