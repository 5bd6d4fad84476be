"""Sharpness of a surrogate's mean prediction under parameter perturbation.

Three views of the same quantity:

* ``first_order_sharpness`` — the linearized estimate rho * ||grad of the
  mean prediction||, which is what training constrains.
* ``sampled_sharpness`` — a sampling oracle for the defining max of
  |mean prediction change| over the radius-rho perturbation sphere. It
  lower-bounds the true max and is used to validate the linearization.
* ``grad_of_grad_norm`` — the parameter gradient of the gradient norm
  itself, approximated by a finite difference of two gradient evaluations
  (a Hessian-vector product in disguise). This is the precision-sensitive
  piece: it subtracts nearly equal vectors, so everything here stays in
  float64 and the step scalar r is exposed rather than hardcoded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EmptyInputError
from .mlp import Surrogate, mean_output_grad, norm2, predict_batch

#: below this gradient norm the perturbation direction is undefined and the
#: regularizer force is treated as zero
DEGENERATE_GRAD_TOL = 1e-12


@dataclass(frozen=True)
class SharpnessEstimate:
    """Linearized sharpness rho * grad_norm; ``estimate`` is exact by construction."""

    rho: float
    grad_norm: float

    @property
    def estimate(self) -> float:
        return self.rho * self.grad_norm


@dataclass(frozen=True)
class BallOracleConfig:
    """Sampling plan for the perturbation-sphere oracle."""

    num_random_directions: int = 64
    include_gradient_directions: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_random_directions < 1:
            raise ValueError(
                f"num_random_directions must be >= 1, got {self.num_random_directions}"
            )


def first_order_sharpness(s: Surrogate, X: np.ndarray, rho: float) -> SharpnessEstimate:
    """Linearized sharpness of the mean prediction over the rows of X."""
    if rho <= 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise EmptyInputError("first_order_sharpness needs a nonempty input matrix")
    return SharpnessEstimate(rho=float(rho), grad_norm=norm2(mean_output_grad(s, X)))


def sampled_sharpness(
    s: Surrogate, X: np.ndarray, rho: float, cfg: BallOracleConfig
) -> float:
    """Max |mean-prediction change| over sampled perturbations of norm rho.

    Directions are uniform on the sphere (normalized Gaussian draws). With
    ``include_gradient_directions`` the two directions +-rho * g/||g|| are
    sampled as well; they realize the linearized maximizer, so for models
    affine in their parameters the result is exact rather than a lower
    bound.
    """
    if rho <= 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise EmptyInputError("sampled_sharpness needs a nonempty input matrix")
    base = float(np.mean(predict_batch(s, X)))
    rng = np.random.default_rng(cfg.seed)
    dim = s.params.shape[0]
    deltas = []
    for _ in range(cfg.num_random_directions):
        d = rng.standard_normal(dim)
        n = np.linalg.norm(d)
        if n == 0.0:
            continue
        deltas.append((rho / n) * d)
    if cfg.include_gradient_directions:
        g = mean_output_grad(s, X)
        gn = norm2(g)
        if gn > DEGENERATE_GRAD_TOL:
            step = (rho / gn) * g
            deltas.append(step)
            deltas.append(-step)
    best = 0.0
    for delta in deltas:
        shifted = float(np.mean(predict_batch(s.with_params(s.params + delta), X)))
        best = max(best, abs(shifted - base))
    return best


def grad_of_grad_norm_from(
    grad_fn: Callable[[np.ndarray], np.ndarray],
    omega: np.ndarray,
    r: float,
) -> tuple[np.ndarray, bool]:
    """Finite-difference estimate of the gradient of ||grad_fn(omega)||.

    Evaluates ``grad_fn`` at omega and at omega + r * unit(grad), and
    returns their scaled difference, which approximates the product of the
    Hessian of the underlying scalar with the unit gradient direction. The
    perturbed point is treated as a plain evaluation point: nothing is
    differentiated through the perturbation itself.

    Returns ``(vector, degenerate)``; if ||grad|| falls below
    ``DEGENERATE_GRAD_TOL`` the direction is undefined, so the zero vector
    is returned with ``degenerate=True``.
    """
    if r <= 0:
        raise ValueError(f"r must be > 0, got {r}")
    omega = np.asarray(omega, dtype=np.float64)
    g = grad_fn(omega)
    gn = float(np.linalg.norm(g))
    if gn <= DEGENERATE_GRAD_TOL:
        return np.zeros_like(omega), True
    g_shift = grad_fn(omega + (r / gn) * g)
    return (g_shift - g) / r, False


def grad_of_grad_norm(s: Surrogate, X: np.ndarray, r: float) -> tuple[np.ndarray, bool]:
    """Gradient of ||mean-prediction gradient|| over the rows of X.

    See ``grad_of_grad_norm_from`` for the approximation and the
    degenerate-gradient convention.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise EmptyInputError("grad_of_grad_norm needs a nonempty input matrix")
    return grad_of_grad_norm_from(
        lambda w: mean_output_grad(s.with_params(w), X), s.params, r
    )
