"""Experiment configuration: a single TOML file per experiment.

The file has four tables (``task``, ``surrogate``, ``trainer``, ``search``)
plus an ``eval`` table for seeds and percentile levels. Everything has a
default, so a minimal config only names the task. Validation failures
carry the dotted field path that caused them.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .mlp import MlpSpec
from .search import INIT_TAGS, SEARCH_TAGS, SearchConfig
from .seeds import seed_list
from .tasks import ORACLE_TAGS
from .trainers import TRAINER_TAGS, IgniteConfig


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved settings for one multi-seed experiment."""

    task: str = "neg_ackley"
    dim: int | None = None
    n_pool: int = 5000
    keep_quantile: float = 0.4
    hidden_widths: tuple[int, ...] = (64, 64)
    hidden_activation: str = "relu"
    output_activation: str = "identity"
    trainer: str = "ignite"
    train: IgniteConfig = field(default_factory=IgniteConfig)
    penalty_weight: float = 1e-4
    search: SearchConfig = field(default_factory=SearchConfig)
    levels: tuple[int, ...] = (50, 80, 100)
    seeds: tuple[int, ...] = ()
    master_seed: int = 0
    num_seeds: int = 16

    def __post_init__(self) -> None:
        if self.task not in ORACLE_TAGS:
            raise ConfigError("task.name", f"unknown task {self.task!r}, expected one of {ORACLE_TAGS}")
        if self.trainer not in TRAINER_TAGS:
            raise ConfigError("trainer.kind", f"unknown trainer {self.trainer!r}, expected one of {TRAINER_TAGS}")
        if self.penalty_weight < 0:
            raise ConfigError("trainer.penalty_weight", "must be >= 0")
        if not self.levels or any(not 0 < lv <= 100 for lv in self.levels):
            raise ConfigError("eval.levels", f"levels must lie in (0, 100], got {self.levels}")
        if not self.seeds and self.num_seeds < 1:
            raise ConfigError("eval.seeds", "need at least one seed")
        try:
            MlpSpec(1, self.hidden_widths, self.hidden_activation, self.output_activation)
        except ValueError as exc:
            raise ConfigError("surrogate", str(exc)) from exc

    def resolved_seeds(self) -> tuple[int, ...]:
        if self.seeds:
            return self.seeds
        return tuple(seed_list(self.master_seed, self.num_seeds))

    def mlp_spec(self, task_dim: int) -> MlpSpec:
        return MlpSpec(
            input_dim=task_dim,
            hidden_widths=self.hidden_widths,
            hidden_activation=self.hidden_activation,
            output_activation=self.output_activation,
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["train"] = asdict(self.train)
        out["search"] = asdict(self.search)
        return out


def _take(table: dict, key: str, path: str, kind, default):
    if key not in table:
        return default
    value = table.pop(key)
    if isinstance(value, bool):
        raise ConfigError(f"{path}.{key}", f"expected {getattr(kind, '__name__', kind)}, got {value!r}")
    if kind is float and isinstance(value, int):
        value = float(value)
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"{path}.{key}", f"expected {getattr(kind, '__name__', kind)}, got {value!r}")
    return value


def _reject_unknown(table: dict, path: str) -> None:
    if table:
        raise ConfigError(f"{path}.{next(iter(table))}", "unknown field")


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed TOML mapping."""
    raw = dict(raw)
    task_t = dict(raw.pop("task", {}))
    surr_t = dict(raw.pop("surrogate", {}))
    train_t = dict(raw.pop("trainer", {}))
    search_t = dict(raw.pop("search", {}))
    eval_t = dict(raw.pop("eval", {}))
    _reject_unknown(raw, "config")

    task = _take(task_t, "name", "task", str, "neg_ackley")
    dim = _take(task_t, "dim", "task", int, None)
    n_pool = _take(task_t, "n_pool", "task", int, 5000)
    keep_q = _take(task_t, "keep_quantile", "task", float, 0.4)
    _reject_unknown(task_t, "task")

    hidden = _take(surr_t, "hidden_widths", "surrogate", list, [64, 64])
    hidden_act = _take(surr_t, "hidden_activation", "surrogate", str, "relu")
    output_act = _take(surr_t, "output_activation", "surrogate", str, "identity")
    _reject_unknown(surr_t, "surrogate")

    trainer = _take(train_t, "kind", "trainer", str, "ignite")
    penalty_weight = _take(train_t, "penalty_weight", "trainer", float, 1e-4)
    train_kwargs = {}
    for key, kind in (
        ("lambda0", float), ("rho", float), ("r", float), ("eta_w", float),
        ("eta_lambda", float), ("epsilon", float), ("iterations", int),
        ("batch_size", int), ("lambda_floor", float),
    ):
        if key in train_t:
            train_kwargs[key] = _take(train_t, key, "trainer", kind, None)
    _reject_unknown(train_t, "trainer")
    try:
        train = IgniteConfig(**train_kwargs)
    except ValueError as exc:
        raise ConfigError("trainer", str(exc)) from exc

    search_kwargs = {}
    for key, kind in (
        ("method", str), ("steps", int), ("step_size", float), ("num_candidates", int),
        ("init", str), ("ensemble_size", int), ("population_size", int),
        ("sigma_init", float), ("sigma_decay", float),
    ):
        if key in search_t:
            search_kwargs[key] = _take(search_t, key, "search", kind, None)
    _reject_unknown(search_t, "search")
    try:
        search = SearchConfig(**search_kwargs)
    except ValueError as exc:
        raise ConfigError("search", str(exc)) from exc

    levels = _take(eval_t, "levels", "eval", list, [50, 80, 100])
    seeds_raw = eval_t.pop("seeds", 16)
    master_seed = _take(eval_t, "master_seed", "eval", int, 0)
    _reject_unknown(eval_t, "eval")

    if isinstance(seeds_raw, bool) or not isinstance(seeds_raw, (int, list)):
        raise ConfigError("eval.seeds", f"expected a count or a list, got {seeds_raw!r}")
    if isinstance(seeds_raw, int):
        seeds: tuple[int, ...] = ()
        num_seeds = seeds_raw
    else:
        seeds = tuple(int(s) for s in seeds_raw)
        num_seeds = len(seeds)

    return ExperimentConfig(
        task=task,
        dim=dim,
        n_pool=n_pool,
        keep_quantile=keep_q,
        hidden_widths=tuple(int(w) for w in hidden),
        hidden_activation=hidden_act,
        output_activation=output_act,
        trainer=trainer,
        train=train,
        penalty_weight=penalty_weight,
        search=search,
        levels=tuple(int(lv) for lv in levels),
        seeds=seeds,
        master_seed=master_seed,
        num_seeds=num_seeds,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(str(path), f"invalid TOML: {exc}") from exc
    return config_from_dict(raw)


def config_from_stored(stored: dict) -> ExperimentConfig:
    """Rebuild a config from the resolved dict embedded in a run report."""
    stored = dict(stored)
    train = IgniteConfig(**stored.pop("train"))
    search = SearchConfig(**stored.pop("search"))
    stored["hidden_widths"] = tuple(stored["hidden_widths"])
    stored["levels"] = tuple(stored["levels"])
    stored["seeds"] = tuple(stored["seeds"])
    return ExperimentConfig(train=train, search=search, **stored)
