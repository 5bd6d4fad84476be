"""Surrogate training regimes.

All five trainers run the same seeded minibatch SGD skeleton and differ
only in the update direction:

* ``train_erm`` — plain mean-squared-error descent.
* ``train_ignite`` — adds a prediction-sharpness force: the constraint
  rho * ||mean-prediction gradient|| <= epsilon is enforced with a
  differential-multiplier update (simultaneous descent on the parameters
  and ascent on the multiplier), and the force direction comes from the
  finite-difference Hessian-vector estimate (g3 - g2) / r.
* ``train_ignite2`` — the same force with the multiplier frozen at its
  initial value.
* ``train_sam`` — descends the loss gradient taken at an adversarially
  perturbed parameter point (loss-sharpness baseline).
* ``train_penalized`` — adds an L1 or L2 parameter penalty to the loss.

Every trainer is a pure function of (data, spec, config): parameter init
and batch sampling consume seed streams derived from ``config.seed``, so
reruns are bitwise identical. The traced loss column is always the plain
data-fit MSE of the batch, whatever extra terms the update includes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyInputError
from .mlp import (
    MlpSpec,
    Surrogate,
    init_params,
    loss_and_grad,
    loss_and_mean_output_grad,
    mean_output_grad,
    norm2,
)
from .seeds import derive
from .sharpness import DEGENERATE_GRAD_TOL
from .tasks import OfflineDataset

TRAINER_TAGS = ("erm", "ignite", "ignite2", "sam", "l1", "l2")


@dataclass(frozen=True)
class IgniteConfig:
    """Hyper-parameters shared by every training regime.

    ``lambda0`` seeds the constraint multiplier, ``rho`` is the sharpness
    radius, ``r`` the Hessian-vector step scalar, ``epsilon`` the
    sharpness threshold, and ``eta_w`` / ``eta_lambda`` the two step
    sizes. The multiplier is clamped at ``lambda_floor`` so prolonged
    constraint satisfaction cannot drive it negative and flip the force's
    sign; set the floor to ``-inf`` to recover the unclamped update.
    """

    lambda0: float = 0.01
    rho: float = 0.05
    r: float = 0.05
    eta_w: float = 0.05
    eta_lambda: float = 1e-3
    epsilon: float = 0.1
    iterations: int = 2000
    batch_size: int = 128
    seed: int = 0
    lambda_floor: float = 0.0

    def __post_init__(self) -> None:
        for name in ("rho", "r", "eta_w", "epsilon"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("iterations", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.lambda0 < 0:
            raise ValueError(f"lambda0 must be >= 0, got {self.lambda0}")
        if self.eta_lambda < 0:
            raise ValueError(f"eta_lambda must be >= 0, got {self.eta_lambda}")
        if self.lambda0 < self.lambda_floor:
            raise ValueError("lambda0 must be >= lambda_floor")


@dataclass(frozen=True, eq=False)
class TrainTrace:
    """Per-iteration training record.

    ``grad_norm`` is the norm of the batch mean-prediction gradient g2,
    ``constraint`` is rho * grad_norm - epsilon, ``lam`` the multiplier
    value used at that iteration (before its update), and ``update_norm``
    the norm of the full applied update direction.
    """

    iteration: np.ndarray
    loss: np.ndarray
    grad_norm: np.ndarray
    constraint: np.ndarray
    lam: np.ndarray
    update_norm: np.ndarray

    def __len__(self) -> int:
        return self.iteration.shape[0]


class _Recorder:
    def __init__(self, n: int):
        self.loss = np.empty(n)
        self.grad_norm = np.empty(n)
        self.constraint = np.empty(n)
        self.lam = np.empty(n)
        self.update_norm = np.empty(n)
        self._i = 0

    def add(self, loss, grad_norm, constraint, lam, update_norm):
        i = self._i
        self.loss[i] = loss
        self.grad_norm[i] = grad_norm
        self.constraint[i] = constraint
        self.lam[i] = lam
        self.update_norm[i] = update_norm
        self._i += 1

    def trace(self) -> TrainTrace:
        n = self._i
        return TrainTrace(
            iteration=np.arange(1, n + 1),
            loss=self.loss,
            grad_norm=self.grad_norm,
            constraint=self.constraint,
            lam=self.lam,
            update_norm=self.update_norm,
        )


def _run_sgd(data: OfflineDataset, spec: MlpSpec, cfg: IgniteConfig, step_fn):
    """Shared minibatch loop; ``step_fn`` maps batch gradients to (direction, next multiplier)."""
    if data.n < 1:
        raise EmptyInputError("training needs a nonempty dataset")
    X, z = data.X, data.z_norm
    w = init_params(spec, derive(cfg.seed, 0))
    rng = np.random.default_rng(derive(cfg.seed, 1))
    lam = float(cfg.lambda0)
    rec = _Recorder(cfg.iterations)
    for _ in range(cfg.iterations):
        idx = rng.integers(0, data.n, size=cfg.batch_size)
        xb, zb = X[idx], z[idx]
        model = Surrogate(spec, w)
        loss, g1, g2 = loss_and_mean_output_grad(model, xb, zb)
        g2_norm = norm2(g2)
        direction, lam_next = step_fn(model, xb, zb, g1, g2, g2_norm, lam)
        rec.add(loss, g2_norm, cfg.rho * g2_norm - cfg.epsilon, lam, norm2(direction))
        w = w - cfg.eta_w * direction
        lam = lam_next
    return Surrogate(spec, w), rec.trace()


def train_erm(data: OfflineDataset, spec: MlpSpec, cfg: IgniteConfig):
    """Plain minibatch MSE descent; the multiplier column stays at lambda0."""

    def step(model, xb, zb, g1, g2, g2_norm, lam):
        return g1, lam

    return _run_sgd(data, spec, cfg, step)


def train_ignite(data: OfflineDataset, spec: MlpSpec, cfg: IgniteConfig):
    """Differential-multiplier training against the sharpness constraint.

    Per iteration: perturb the parameters by r along the unit
    mean-prediction gradient, re-evaluate that gradient there (a plain
    evaluation, nothing differentiated through the perturbation), and push
    along lam * rho / r * (g3 - g2) in addition to the loss gradient. The
    multiplier then moves by eta_lambda * (rho * ||g2|| - epsilon) and is
    clamped at lambda_floor. A vanishing ||g2|| means the constraint is
    already slack at a critical point, so the force is skipped for that
    iteration while the multiplier still sees the zeroed constraint.
    """

    def step(model, xb, zb, g1, g2, g2_norm, lam):
        if lam != 0.0 and g2_norm > DEGENERATE_GRAD_TOL:
            perturbed = model.with_params(model.params + (cfg.r / g2_norm) * g2)
            g3 = mean_output_grad(perturbed, xb)
            direction = g1 + (lam * cfg.rho / cfg.r) * (g3 - g2)
        else:
            direction = g1
        lam_next = max(cfg.lambda_floor, lam + cfg.eta_lambda * (cfg.rho * g2_norm - cfg.epsilon))
        return direction, lam_next

    return _run_sgd(data, spec, cfg, step)


def train_ignite2(data: OfflineDataset, spec: MlpSpec, cfg: IgniteConfig):
    """Sharpness force with the multiplier treated as a fixed hyper-parameter."""
    return train_ignite(data, spec, replace(cfg, eta_lambda=0.0))


def train_sam(data: OfflineDataset, spec: MlpSpec, cfg: IgniteConfig):
    """Loss-sharpness baseline.

    Each step descends the loss gradient evaluated at the adversarial
    point w + rho * g_loss / ||g_loss||. At an exact critical point of
    the loss the perturbation direction is undefined and the plain
    (zero) gradient is used.
    """

    def step(model, xb, zb, g1, g2, g2_norm, lam):
        g1_norm = norm2(g1)
        if g1_norm > DEGENERATE_GRAD_TOL:
            adv = model.with_params(model.params + (cfg.rho / g1_norm) * g1)
            _, direction = loss_and_grad(adv, xb, zb)
        else:
            direction = g1
        return direction, lam

    return _run_sgd(data, spec, cfg, step)


def train_penalized(
    data: OfflineDataset, spec: MlpSpec, cfg: IgniteConfig, penalty: str, weight: float
):
    """MSE descent plus an L1 (subgradient, sign(0) = 0) or L2 parameter penalty."""
    if penalty not in ("l1", "l2"):
        raise ValueError(f"penalty must be 'l1' or 'l2', got {penalty!r}")
    if weight < 0:
        raise ValueError(f"weight must be >= 0, got {weight}")

    def step(model, xb, zb, g1, g2, g2_norm, lam):
        if weight != 0.0:
            if penalty == "l1":
                direction = g1 + weight * np.sign(model.params)
            else:
                direction = g1 + (2.0 * weight) * model.params
        else:
            direction = g1
        return direction, lam

    return _run_sgd(data, spec, cfg, step)


def make_trainer(tag: str, penalty_weight: float = 1e-4):
    """Trainer registry used by the experiment harness."""
    if tag == "erm":
        return train_erm
    if tag == "ignite":
        return train_ignite
    if tag == "ignite2":
        return train_ignite2
    if tag == "sam":
        return train_sam
    if tag in ("l1", "l2"):
        return lambda data, spec, cfg: train_penalized(data, spec, cfg, tag, penalty_weight)
    raise ValueError(f"unknown trainer tag {tag!r}; expected one of {TRAINER_TAGS}")
