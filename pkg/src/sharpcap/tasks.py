"""Synthetic analytic oracles and offline dataset generation.

Each task is a closed-form score function on a box, oriented so that
higher is better, together with certified range constants used to map raw
scores onto [0, 1]. Offline datasets are drawn uniformly from the box and
then truncated to the low-scoring quantile, which recreates the usual
situation where the logged data never contains near-optimal designs.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import DomainError, EmptyInputError

ORACLE_TAGS = ("quad_bowl", "neg_ackley", "neg_rastrigin", "neg_branin")


def _quad_bowl_values(X: np.ndarray) -> np.ndarray:
    return -np.sum(X * X, axis=1)


def _neg_ackley_values(X: np.ndarray) -> np.ndarray:
    rms = np.sqrt(np.mean(X * X, axis=1))
    cos_mean = np.mean(np.cos(2.0 * np.pi * X), axis=1)
    return -(-20.0 * np.exp(-0.2 * rms) - np.exp(cos_mean) + 20.0 + np.exp(1.0))


def _neg_rastrigin_values(X: np.ndarray) -> np.ndarray:
    d = X.shape[1]
    return -(10.0 * d + np.sum(X * X - 10.0 * np.cos(2.0 * np.pi * X), axis=1))


_BRANIN_B = 5.1 / (4.0 * np.pi**2)
_BRANIN_C = 5.0 / np.pi
_BRANIN_T = 1.0 / (8.0 * np.pi)


def _neg_branin_values(X: np.ndarray) -> np.ndarray:
    x1, x2 = X[:, 0], X[:, 1]
    inner = x2 - _BRANIN_B * x1**2 + _BRANIN_C * x1 - 6.0
    return -(inner**2 + 10.0 * (1.0 - _BRANIN_T) * np.cos(x1) + 10.0)


_ORACLES = {
    "quad_bowl": _quad_bowl_values,
    "neg_ackley": _neg_ackley_values,
    "neg_rastrigin": _neg_rastrigin_values,
    "neg_branin": _neg_branin_values,
}


@lru_cache(maxsize=None)
def _ackley_box_max(half_width: float) -> float:
    """Upper bound on the (un-negated) Ackley value over [-hw, hw]^d.

    Ackley couples coordinates only through the means q = mean(x_i^2) and
    c = mean(cos 2*pi*x_i). Any attainable (q, c) lies in the convex hull
    of the per-coordinate curve {(x^2, cos 2*pi*x) : 0 <= x <= hw}, and the
    objective increases in q, so its max over the hull's upper boundary
    bounds the box max for every dimension at once.
    """
    x = np.linspace(0.0, half_width, 40001)
    s = x * x
    c = np.cos(2.0 * np.pi * x)
    order = np.lexsort((-s, c))
    pts = np.column_stack([c[order], s[order]])
    hull: list[np.ndarray] = []
    for p in pts:
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0])
            if cross >= 0.0:
                hull.pop()
            else:
                break
        hull.append(p)
    boundary = [hull[0]]
    for a, b in zip(hull[:-1], hull[1:]):
        t = np.linspace(0.0, 1.0, 512)[1:, None]
        boundary.append(a[None, :] * (1.0 - t) + b[None, :] * t)
    pts_on_boundary = np.vstack(boundary).reshape(-1, 2)
    cb, qb = pts_on_boundary[:, 0], pts_on_boundary[:, 1]
    vals = -20.0 * np.exp(-0.2 * np.sqrt(np.maximum(qb, 0.0))) - np.exp(cb) + 20.0 + np.exp(1.0)
    best = float(vals.max())
    return best + 1e-3 * (abs(best) + 1.0)


@lru_cache(maxsize=None)
def _rastrigin_coord_max(half_width: float) -> float:
    """Exact per-coordinate max of x^2 - 10 cos(2*pi*x) + 10 on [-hw, hw]."""

    def phi(x):
        return x * x - 10.0 * np.cos(2.0 * np.pi * x) + 10.0

    grid = np.linspace(0.0, half_width, 100001)
    vals = phi(grid)
    x0 = float(grid[int(np.argmax(vals))])
    x_new = x0
    for _ in range(60):
        d1 = 2.0 * x_new + 20.0 * np.pi * np.sin(2.0 * np.pi * x_new)
        d2 = 2.0 + 40.0 * np.pi**2 * np.cos(2.0 * np.pi * x_new)
        if d2 == 0.0:
            break
        step = d1 / d2
        x_new = min(max(x_new - step, 0.0), half_width)
        if abs(step) < 1e-15:
            break
    candidates = np.array([x0, x_new, half_width])
    return float(phi(candidates).max())


@lru_cache(maxsize=None)
def _branin_box_max() -> float:
    """Max of the (un-negated) Branin value over its standard box, by zooming grids."""
    lo = np.array([-5.0, 0.0])
    hi = np.array([10.0, 15.0])
    window_lo, window_hi = lo.copy(), hi.copy()
    best = -np.inf
    for _ in range(6):
        g1 = np.linspace(window_lo[0], window_hi[0], 401)
        g2 = np.linspace(window_lo[1], window_hi[1], 401)
        xx, yy = np.meshgrid(g1, g2)
        X = np.column_stack([xx.ravel(), yy.ravel()])
        vals = -_neg_branin_values(X)
        i = int(np.argmax(vals))
        best = max(best, float(vals[i]))
        center = X[i]
        span = (window_hi - window_lo) * 0.02
        window_lo = np.maximum(lo, center - span)
        window_hi = np.minimum(hi, center + span)
    return best + 1e-9


@dataclass(frozen=True, eq=False)
class SyntheticTask:
    """A box-constrained analytic score function with certified range metadata."""

    name: str
    dim: int
    bounds: np.ndarray  # (dim, 2) rows of (lo, hi)
    oracle: str
    y_min_box: float
    y_max_box: float
    known_argmax: np.ndarray | None = None

    def __post_init__(self) -> None:
        b = np.asarray(self.bounds, dtype=np.float64)
        if b.shape != (self.dim, 2):
            raise ValueError(f"bounds must have shape ({self.dim}, 2), got {b.shape}")
        if not np.all(b[:, 0] < b[:, 1]):
            raise ValueError("every bound must satisfy lo < hi")
        object.__setattr__(self, "bounds", b)
        if self.oracle not in _ORACLES:
            raise ValueError(f"unknown oracle tag {self.oracle!r}")
        if not self.y_min_box < self.y_max_box:
            raise ValueError("y_min_box must be < y_max_box")
        if self.known_argmax is not None:
            xm = np.asarray(self.known_argmax, dtype=np.float64)
            object.__setattr__(self, "known_argmax", xm)
            got = float(_ORACLES[self.oracle](xm[None, :])[0])
            if abs(got - self.y_max_box) > 1e-9:
                raise ValueError(
                    f"oracle(known_argmax)={got} does not match y_max_box={self.y_max_box}"
                )

    @property
    def lo(self) -> np.ndarray:
        return self.bounds[:, 0]

    @property
    def hi(self) -> np.ndarray:
        return self.bounds[:, 1]

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))


def quad_bowl(dim: int = 16, half_width: float = 2.0) -> SyntheticTask:
    bounds = np.tile([-half_width, half_width], (dim, 1))
    return SyntheticTask(
        name=f"quad_bowl_{dim}",
        dim=dim,
        bounds=bounds,
        oracle="quad_bowl",
        y_min_box=-dim * half_width**2,
        y_max_box=0.0,
        known_argmax=np.zeros(dim),
    )


def neg_ackley(dim: int = 8, half_width: float = 5.0) -> SyntheticTask:
    bounds = np.tile([-half_width, half_width], (dim, 1))
    return SyntheticTask(
        name=f"neg_ackley_{dim}",
        dim=dim,
        bounds=bounds,
        oracle="neg_ackley",
        y_min_box=-_ackley_box_max(half_width),
        y_max_box=0.0,
        known_argmax=np.zeros(dim),
    )


def neg_rastrigin(dim: int = 8, half_width: float = 5.12) -> SyntheticTask:
    bounds = np.tile([-half_width, half_width], (dim, 1))
    return SyntheticTask(
        name=f"neg_rastrigin_{dim}",
        dim=dim,
        bounds=bounds,
        oracle="neg_rastrigin",
        y_min_box=-dim * _rastrigin_coord_max(half_width) - 1e-9,
        y_max_box=0.0,
        known_argmax=np.zeros(dim),
    )


def neg_branin() -> SyntheticTask:
    bounds = np.array([[-5.0, 10.0], [0.0, 15.0]])
    return SyntheticTask(
        name="neg_branin_2",
        dim=2,
        bounds=bounds,
        oracle="neg_branin",
        y_min_box=-_branin_box_max(),
        y_max_box=-10.0 * _BRANIN_T,
        known_argmax=np.array([np.pi, 2.275]),
    )


_DEFAULT_DIMS = {"quad_bowl": 16, "neg_ackley": 8, "neg_rastrigin": 8, "neg_branin": 2}


def make_task(tag: str, dim: int | None = None) -> SyntheticTask:
    """Build a task by oracle tag, with the roster's default dimension."""
    if tag not in ORACLE_TAGS:
        raise ValueError(f"unknown task tag {tag!r}; expected one of {ORACLE_TAGS}")
    if tag == "neg_branin":
        if dim not in (None, 2):
            raise ValueError("neg_branin is only defined for dim=2")
        return neg_branin()
    d = _DEFAULT_DIMS[tag] if dim is None else dim
    if tag == "quad_bowl":
        return quad_bowl(d)
    if tag == "neg_ackley":
        return neg_ackley(d)
    return neg_rastrigin(d)


def standard_suite() -> tuple[SyntheticTask, ...]:
    """The default four-task roster."""
    return (quad_bowl(16), neg_ackley(8), neg_rastrigin(8), neg_branin())


def _check_in_bounds(t: SyntheticTask, X: np.ndarray) -> None:
    if np.any(X < t.lo) or np.any(X > t.hi):
        raise DomainError(f"designs outside the bounds of task {t.name}")


def oracle_batch(t: SyntheticTask, X: np.ndarray) -> np.ndarray:
    """Oracle values for each row of X; rejects out-of-bounds designs."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != t.dim:
        raise ValueError(f"X must have shape (n, {t.dim}), got {X.shape}")
    _check_in_bounds(t, X)
    return _ORACLES[t.oracle](X)


def oracle_eval(t: SyntheticTask, x: np.ndarray) -> float:
    """Oracle value at a single design."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != t.dim:
        raise ValueError(f"x must have shape ({t.dim},), got {x.shape}")
    return float(oracle_batch(t, x[None, :])[0])


def normalize_score(t: SyntheticTask, y_raw):
    """Affine map of raw scores so the recorded box range becomes [0, 1].

    Values above 1 mean the raw score exceeded the recorded box maximum;
    they are passed through but flagged with a warning.
    """
    y = np.asarray(y_raw, dtype=np.float64)
    out = (y - t.y_min_box) / (t.y_max_box - t.y_min_box)
    if np.any(out > 1.0 + 1e-12):
        warnings.warn(
            f"normalized score exceeds 1 on task {t.name}: raw value above the "
            "recorded box maximum",
            RuntimeWarning,
            stacklevel=2,
        )
    if y.ndim == 0:
        return float(out)
    return out


@dataclass(eq=False)
class OfflineDataset:
    """Static design/score pairs with normalization and generation metadata."""

    task_name: str
    oracle: str
    X: np.ndarray
    z_raw: np.ndarray
    z_norm: np.ndarray
    y_min_box: float
    y_max_box: float
    n_pool: int
    keep_quantile: float
    seed: int
    pool_quantile_value: float

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        self.z_raw = np.asarray(self.z_raw, dtype=np.float64)
        self.z_norm = np.asarray(self.z_norm, dtype=np.float64)
        if self.X.ndim != 2 or self.X.shape[0] != self.z_raw.shape[0]:
            raise ValueError("X and z_raw row counts must agree")
        if self.z_raw.shape != self.z_norm.shape:
            raise ValueError("z_raw and z_norm must have the same shape")
        if self.n < 1:
            raise EmptyInputError("dataset must contain at least one point")
        span = self.y_max_box - self.y_min_box
        if not np.allclose(self.z_norm, (self.z_raw - self.y_min_box) / span, atol=1e-12):
            raise ValueError("z_norm is inconsistent with the normalization constants")
        if np.any(self.z_norm < -1e-12) or np.any(self.z_norm > 1.0 + 1e-12):
            raise ValueError("z_norm entries must lie in [0, 1]")
        if self.z_raw.max() > self.pool_quantile_value + 1e-12:
            raise ValueError("dataset maximum exceeds the recorded pool quantile")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


def generate_offline_dataset(
    t: SyntheticTask, n_pool: int = 5000, keep_quantile: float = 0.4, seed: int = 0
) -> OfflineDataset:
    """Uniform pool over the box, truncated at the empirical score quantile.

    Keeps exactly the pool points whose oracle value is at or below the
    ``keep_quantile`` quantile, so the retained scores never reach the
    pool's top region (let alone the box optimum).
    """
    if n_pool < 10:
        raise ValueError(f"n_pool must be >= 10, got {n_pool}")
    if not 0.0 < keep_quantile <= 1.0:
        raise ValueError(f"keep_quantile must be in (0, 1], got {keep_quantile}")
    rng = np.random.default_rng(seed)
    X = rng.uniform(t.lo, t.hi, size=(n_pool, t.dim))
    y = oracle_batch(t, X)
    thresh = float(np.quantile(y, keep_quantile))
    keep = y <= thresh
    if not np.any(keep):
        raise ValueError("truncation removed every pool point")
    z_raw = y[keep]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        z_norm = normalize_score(t, z_raw)
    return OfflineDataset(
        task_name=t.name,
        oracle=t.oracle,
        X=X[keep],
        z_raw=z_raw,
        z_norm=z_norm,
        y_min_box=t.y_min_box,
        y_max_box=t.y_max_box,
        n_pool=n_pool,
        keep_quantile=keep_quantile,
        seed=seed,
        pool_quantile_value=thresh,
    )


def _sidecar_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(csv_path.suffix + ".meta.json")


def save_dataset(data: OfflineDataset, t: SyntheticTask, csv_path: str | Path) -> Path:
    """Write the dataset as CSV plus a JSON sidecar with task metadata."""
    csv_path = Path(csv_path)
    cols = [f"x_{i}" for i in range(data.dim)] + ["z_raw", "z_norm"]
    with open(csv_path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(data.n):
            # repr of a Python float round-trips the exact double
            row = [repr(float(v)) for v in data.X[i]]
            row += [repr(float(data.z_raw[i])), repr(float(data.z_norm[i]))]
            fh.write(",".join(row) + "\n")
    meta = {
        "task_name": data.task_name,
        "oracle": data.oracle,
        "dim": data.dim,
        "bounds": t.bounds.tolist(),
        "y_min_box": data.y_min_box,
        "y_max_box": data.y_max_box,
        "known_argmax": None if t.known_argmax is None else t.known_argmax.tolist(),
        "n_pool": data.n_pool,
        "keep_quantile": data.keep_quantile,
        "seed": data.seed,
        "pool_quantile_value": data.pool_quantile_value,
        "n": data.n,
    }
    with open(_sidecar_path(csv_path), "w") as fh:
        json.dump(meta, fh, indent=2)
    return csv_path


def load_dataset(csv_path: str | Path) -> tuple[OfflineDataset, SyntheticTask]:
    """Read a dataset CSV and its sidecar; rebuilds the task from metadata."""
    csv_path = Path(csv_path)
    with open(_sidecar_path(csv_path)) as fh:
        meta = json.load(fh)
    raw = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    dim = meta["dim"]
    task = SyntheticTask(
        name=meta["task_name"],
        dim=dim,
        bounds=np.asarray(meta["bounds"]),
        oracle=meta["oracle"],
        y_min_box=meta["y_min_box"],
        y_max_box=meta["y_max_box"],
        known_argmax=None if meta["known_argmax"] is None else np.asarray(meta["known_argmax"]),
    )
    data = OfflineDataset(
        task_name=meta["task_name"],
        oracle=meta["oracle"],
        X=raw[:, :dim],
        z_raw=raw[:, dim],
        z_norm=raw[:, dim + 1],
        y_min_box=meta["y_min_box"],
        y_max_box=meta["y_max_box"],
        n_pool=meta["n_pool"],
        keep_quantile=meta["keep_quantile"],
        seed=meta["seed"],
        pool_quantile_value=meta["pool_quantile_value"],
    )
    return data, task
