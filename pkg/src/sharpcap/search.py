"""Design search over trained surrogates and percentile evaluation.

Search methods produce a fixed-size candidate set inside the task box:
projected gradient ascent on a single surrogate or on an ensemble
aggregate (mean, or pointwise min with the gradient taken from the
minimizing member), and a score-function search that evolves a diagonal
Gaussian over designs. Candidates are then scored by the task oracle and
summarized at fixed percentile levels of the normalized score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyInputError
from .mlp import Surrogate, input_grad_batch, predict_batch
from .sharpness import SharpnessEstimate, first_order_sharpness
from .tasks import OfflineDataset, SyntheticTask, normalize_score, oracle_batch

SEARCH_TAGS = ("ga", "ens_mean", "ens_min", "reinforce")
INIT_TAGS = ("top_k_dataset", "random_box")

SIGMA_FLOOR = 1e-3


@dataclass(frozen=True)
class SearchConfig:
    """Candidate search settings.

    ``step_size`` and ``sigma_init`` may be left as None to default to
    0.01 and 0.05 of the box diagonal. ``population_size``, ``sigma_init``
    and ``sigma_decay`` only matter for the score-function method.
    """

    method: str = "ga"
    steps: int = 100
    step_size: float | None = None
    num_candidates: int = 128
    init: str = "top_k_dataset"
    ensemble_size: int = 4
    population_size: int = 32
    sigma_init: float | None = None
    sigma_decay: float = 0.97
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in SEARCH_TAGS:
            raise ValueError(f"method must be one of {SEARCH_TAGS}, got {self.method!r}")
        if self.init not in INIT_TAGS:
            raise ValueError(f"init must be one of {INIT_TAGS}, got {self.init!r}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.num_candidates < 1:
            raise ValueError(f"num_candidates must be >= 1, got {self.num_candidates}")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError(f"step_size must be > 0, got {self.step_size}")
        if self.method in ("ens_mean", "ens_min") and self.ensemble_size < 2:
            raise ValueError("ensemble methods need ensemble_size >= 2")
        if self.population_size < 2:
            raise ValueError(f"population_size must be >= 2, got {self.population_size}")
        if self.sigma_init is not None and self.sigma_init <= 0:
            raise ValueError(f"sigma_init must be > 0, got {self.sigma_init}")
        if not 0.0 < self.sigma_decay <= 1.0:
            raise ValueError(f"sigma_decay must be in (0, 1], got {self.sigma_decay}")


@dataclass(eq=False)
class CandidateSet:
    """Optimized designs, their surrogate scores, and (once filled) oracle scores."""

    designs: np.ndarray
    surrogate_scores: np.ndarray
    oracle_scores: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.designs = np.asarray(self.designs, dtype=np.float64)
        self.surrogate_scores = np.asarray(self.surrogate_scores, dtype=np.float64)
        if self.designs.shape[0] != self.surrogate_scores.shape[0]:
            raise ValueError("designs and surrogate_scores row counts must agree")

    @property
    def n(self) -> int:
        return self.designs.shape[0]


@dataclass(frozen=True)
class PercentileReport:
    """Normalized and raw oracle scores at fixed percentile levels (nearest rank)."""

    levels: tuple[int, ...]
    normalized: tuple[float, ...]
    raw: tuple[float, ...]
    seed: int | None = None


def _resolve_step(cfg: SearchConfig, bounds: np.ndarray) -> float:
    diag = float(np.linalg.norm(bounds[:, 1] - bounds[:, 0]))
    return cfg.step_size if cfg.step_size is not None else 0.01 * diag


def _resolve_sigma(cfg: SearchConfig, bounds: np.ndarray) -> float:
    diag = float(np.linalg.norm(bounds[:, 1] - bounds[:, 0]))
    return cfg.sigma_init if cfg.sigma_init is not None else 0.05 * diag


def _init_designs(
    data: OfflineDataset, cfg: SearchConfig, bounds: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    k = cfg.num_candidates
    if cfg.init == "random_box":
        return rng.uniform(bounds[:, 0], bounds[:, 1], size=(k, bounds.shape[0]))
    order = np.argsort(data.z_raw)[::-1]
    top = data.X[order]
    if top.shape[0] >= k:
        return top[:k].copy()
    reps = -(-k // top.shape[0])
    return np.tile(top, (reps, 1))[:k]


def _aggregate(models: list[Surrogate], X: np.ndarray, method: str) -> np.ndarray:
    preds = np.stack([predict_batch(m, X) for m in models])
    if method == "ga":
        return preds[0]
    if method == "ens_mean":
        return preds.mean(axis=0)
    return preds.min(axis=0)


def _aggregate_grads(models: list[Surrogate], X: np.ndarray, method: str) -> np.ndarray:
    if method == "ga":
        return input_grad_batch(models[0], X)
    grads = np.stack([input_grad_batch(m, X) for m in models])
    if method == "ens_mean":
        return grads.mean(axis=0)
    preds = np.stack([predict_batch(m, X) for m in models])
    winner = np.argmin(preds, axis=0)  # ties resolve to the lowest model index
    return grads[winner, np.arange(X.shape[0])]


def grad_ascent_search(
    models: list[Surrogate] | Surrogate,
    data: OfflineDataset,
    cfg: SearchConfig,
    bounds: np.ndarray,
) -> CandidateSet:
    """Projected gradient ascent on a surrogate or an ensemble aggregate."""
    if isinstance(models, Surrogate):
        models = [models]
    models = list(models)
    if cfg.method == "ga" and len(models) != 1:
        raise ConfigError("search.method", f"ga expects exactly 1 model, got {len(models)}")
    if cfg.method in ("ens_mean", "ens_min") and len(models) != cfg.ensemble_size:
        raise ConfigError(
            "search.ensemble_size",
            f"{cfg.method} expects {cfg.ensemble_size} models, got {len(models)}",
        )
    if cfg.method == "reinforce":
        raise ConfigError("search.method", "reinforce candidates come from reinforce_search")
    bounds = np.asarray(bounds, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    step = _resolve_step(cfg, bounds)
    X = _init_designs(data, cfg, bounds, rng)
    lo, hi = bounds[:, 0], bounds[:, 1]
    for _ in range(cfg.steps):
        X = np.clip(X + step * _aggregate_grads(models, X, cfg.method), lo, hi)
    return CandidateSet(designs=X, surrogate_scores=_aggregate(models, X, cfg.method))


def reinforce_search(
    model: Surrogate, data: OfflineDataset, cfg: SearchConfig, bounds: np.ndarray
) -> CandidateSet:
    """Score-function search with a diagonal Gaussian over designs.

    The mean starts at the dataset's best row. Each step samples a
    population, weights the noise by mean-centered surrogate scores to
    estimate the gradient of the expected score, moves the mean, and
    shrinks sigma by ``sigma_decay`` (floored at SIGMA_FLOOR). The final
    candidates are draws from the terminal distribution clipped to the box.
    """
    bounds = np.asarray(bounds, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    step = _resolve_step(cfg, bounds)
    sigma = max(_resolve_sigma(cfg, bounds), SIGMA_FLOOR)
    mean = data.X[int(np.argmax(data.z_raw))].copy()
    dim = bounds.shape[0]
    for _ in range(cfg.steps):
        noise = rng.standard_normal((cfg.population_size, dim))
        pop = mean + sigma * noise
        scores = predict_batch(model, pop)
        adv = scores - scores.mean()
        grad_est = (adv[:, None] * noise).mean(axis=0) / sigma
        mean = mean + step * grad_est
        sigma = max(sigma * cfg.sigma_decay, SIGMA_FLOOR)
    designs = np.clip(
        mean + sigma * rng.standard_normal((cfg.num_candidates, dim)),
        bounds[:, 0],
        bounds[:, 1],
    )
    return CandidateSet(designs=designs, surrogate_scores=predict_batch(model, designs))


def nearest_rank(sorted_values: np.ndarray, level: int) -> float:
    """Nearest-rank percentile of an ascending-sorted value array."""
    n = sorted_values.shape[0]
    rank = max(1, int(np.ceil(level / 100.0 * n)))
    return float(sorted_values[rank - 1])


def evaluate_candidates(
    c: CandidateSet,
    task: SyntheticTask,
    levels: tuple[int, ...] = (50, 80, 100),
    seed: int | None = None,
) -> PercentileReport:
    """Oracle-score the candidates and report nearest-rank percentiles."""
    if c.n == 0:
        raise EmptyInputError("cannot evaluate an empty candidate set")
    if any(not 0 < lv <= 100 for lv in levels):
        raise ValueError(f"levels must lie in (0, 100], got {levels}")
    c.oracle_scores = oracle_batch(task, c.designs)
    raw_sorted = np.sort(c.oracle_scores)
    norm_sorted = normalize_score(task, raw_sorted)
    return PercentileReport(
        levels=tuple(int(lv) for lv in levels),
        normalized=tuple(nearest_rank(norm_sorted, lv) for lv in levels),
        raw=tuple(nearest_rank(raw_sorted, lv) for lv in levels),
        seed=seed,
    )


def candidate_sharpness(model: Surrogate, c: CandidateSet, rho: float) -> SharpnessEstimate:
    """Linearized sharpness of the surrogate measured over the candidate designs."""
    if c.n == 0:
        raise EmptyInputError("cannot measure sharpness on an empty candidate set")
    return first_order_sharpness(model, c.designs, rho)
