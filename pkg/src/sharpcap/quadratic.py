"""A quantile-style quadratic surrogate with provably positive curvature.

The base function is omega^T mean_vec + (gamma/2) * sqrt(omega^T A omega)
with A = diag(a_diag), a linear predictor plus a scaled standard deviation
term. Expanding it to second order around the reference point
omega_plus = (1/m, ..., 1/m) gives a surrogate that is exactly quadratic
in its parameters, so its parameter Hessian is a constant diagonal matrix
with a closed form. That makes it the one model in this package where
curvature claims (positive minimum eigenvalue, boundedness on a parameter
ball) can be checked against brute-force numerics, and where the
finite-difference Hessian-vector trick must be exact up to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularityError


@dataclass(frozen=True, eq=False)
class QuadraticSurrogate:
    """Diagonal-covariance quantile predictor expanded around its reference point.

    ``a_diag`` entries must lie strictly inside (0, 1); ``tau`` is the radius
    of the parameter ball on which boundedness is asserted.
    """

    a_diag: np.ndarray
    mean_vec: np.ndarray
    gamma: float
    tau: float = 1.0

    def __post_init__(self) -> None:
        a = np.asarray(self.a_diag, dtype=np.float64)
        m = np.asarray(self.mean_vec, dtype=np.float64)
        if a.ndim != 1 or a.shape[0] < 1:
            raise ValueError("a_diag must be a nonempty vector")
        if np.any(a <= 0.0) or np.any(a >= 1.0):
            raise ValueError("a_diag entries must lie strictly inside (0, 1)")
        if m.shape != a.shape:
            raise ValueError("mean_vec must match a_diag in length")
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.tau <= 0.0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        object.__setattr__(self, "a_diag", a)
        object.__setattr__(self, "mean_vec", m)

    @property
    def dim(self) -> int:
        return self.a_diag.shape[0]

    @property
    def omega_plus(self) -> np.ndarray:
        return np.full(self.dim, 1.0 / self.dim)


def reference_hessian_diag(q: QuadraticSurrogate) -> np.ndarray:
    """Diagonal second derivatives of the base function at the reference point.

    Closed form: (gamma/2) * (sum(a)/m^2)^(-3/2) * a_i * B_i with
    B_i = (sum(a) - a_i)/m^2. All entries are strictly positive whenever
    gamma > 0 and m >= 2; for m = 1 the B factor vanishes identically and
    the construction is degenerate.
    """
    a = q.a_diag
    m = q.dim
    total = float(a.sum())
    s_ref = total / m**2
    b = (total - a) / m**2
    return (q.gamma / 2.0) * s_ref ** (-1.5) * a * b


def base_value_and_derivs(
    q: QuadraticSurrogate, omega: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and gradient of the base function at omega, plus the reference Hessian diagonal."""
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape != (q.dim,):
        raise ValueError(f"omega must have shape ({q.dim},), got {omega.shape}")
    s = float(omega @ (q.a_diag * omega))
    if s <= 0.0:
        raise SingularityError(f"omega^T A omega must be > 0, got {s}")
    root = np.sqrt(s)
    value = float(omega @ q.mean_vec) + 0.5 * q.gamma * root
    grad = q.mean_vec + (q.gamma / 2.0) * (q.a_diag * omega) / root
    return value, grad, reference_hessian_diag(q)


def expansion_coefficients(q: QuadraticSurrogate) -> tuple[float, np.ndarray, np.ndarray]:
    """The surrogate as const + omega^T lin + (1/2) omega^T diag(h) omega.

    These are the collected coefficients of the second-order expansion of
    the base function around the reference point, using the diagonal
    reference Hessian. The linear term is grad_ref - h * omega_plus and the
    constant absorbs everything independent of omega.
    """
    w_plus = q.omega_plus
    value_ref, grad_ref, h = base_value_and_derivs(q, w_plus)
    lin = grad_ref - h * w_plus
    const = value_ref - float(w_plus @ grad_ref) + 0.5 * float(w_plus @ (h * w_plus))
    return const, lin, h


def expansion_value(q: QuadraticSurrogate, omega: np.ndarray) -> float:
    """Surrogate value at omega (quadratic in omega by construction)."""
    omega = np.asarray(omega, dtype=np.float64)
    const, lin, h = expansion_coefficients(q)
    return const + float(omega @ lin) + 0.5 * float(omega @ (h * omega))


def expansion_grad(q: QuadraticSurrogate, omega: np.ndarray) -> np.ndarray:
    """Parameter gradient of the surrogate: an affine field with constant Hessian."""
    omega = np.asarray(omega, dtype=np.float64)
    _, lin, h = expansion_coefficients(q)
    return lin + h * omega


@dataclass(frozen=True)
class ConstructionReport:
    """Outcome of the curvature and boundedness checks."""

    dim: int
    gamma: float
    tau: float
    degenerate: bool
    lambda_min: float
    lambda_max: float
    curvature_positive: bool
    bound_value: float
    max_abs_value: float
    bound_respected: bool
    samples: int

    @property
    def passed(self) -> bool:
        return (not self.degenerate) and self.curvature_positive and self.bound_respected


def check_construction(
    q: QuadraticSurrogate, samples_in_ball: int = 200, seed: int = 0
) -> ConstructionReport:
    """Verify positive curvature and the explicit bound on |value| over ||omega|| <= tau.

    The bound is tau * ||lin|| + (1/2) * lambda_max * tau^2 + |const| with
    the expansion coefficients above; samples are drawn uniformly from the
    radius-tau ball.
    """
    if samples_in_ball < 1:
        raise ValueError(f"samples_in_ball must be >= 1, got {samples_in_ball}")
    h = reference_hessian_diag(q)
    lam_min = float(h.min())
    lam_max = float(h.max())
    degenerate = q.dim < 2 or q.gamma == 0.0
    const, lin, _ = expansion_coefficients(q)
    bound = q.tau * float(np.linalg.norm(lin)) + 0.5 * lam_max * q.tau**2 + abs(const)
    rng = np.random.default_rng(seed)
    max_abs = 0.0
    for _ in range(samples_in_ball):
        d = rng.standard_normal(q.dim)
        n = float(np.linalg.norm(d))
        if n == 0.0:
            continue
        radius = q.tau * rng.uniform() ** (1.0 / q.dim)
        omega = (radius / n) * d
        val = const + float(omega @ lin) + 0.5 * float(omega @ (h * omega))
        max_abs = max(max_abs, abs(val))
    return ConstructionReport(
        dim=q.dim,
        gamma=q.gamma,
        tau=q.tau,
        degenerate=degenerate,
        lambda_min=lam_min,
        lambda_max=lam_max,
        curvature_positive=lam_min > 0.0,
        bound_value=bound,
        max_abs_value=max_abs,
        bound_respected=max_abs <= bound + 1e-12,
        samples=samples_in_ball,
    )
