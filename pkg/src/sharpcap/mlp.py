"""Dense feed-forward surrogates with hand-rolled reverse-mode gradients.

All parameters of a network live in one flat float64 vector (per layer:
weight matrix in row-major order, then bias vector), so optimizer steps,
parameter perturbations, and norms stay plain vector arithmetic. The
reverse sweep is exact and can seed three different upstream signals:
the squared-error loss, the batch-mean prediction, and the prediction's
dependence on its input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, ShapeError

_HIDDEN_ACTIVATIONS = ("relu", "tanh")
_OUTPUT_ACTIVATIONS = ("identity", "unit_sigmoid")


@dataclass(frozen=True)
class MlpSpec:
    """Shape and activation choice of a dense surrogate.

    An empty ``hidden_widths`` yields a purely affine model, which keeps
    exact-arithmetic checks possible.
    """

    input_dim: int
    hidden_widths: tuple[int, ...] = (64, 64)
    hidden_activation: str = "relu"
    output_activation: str = "identity"

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError(f"hidden widths must all be >= 1, got {self.hidden_widths}")
        if self.hidden_activation not in _HIDDEN_ACTIVATIONS:
            raise ValueError(
                f"hidden_activation must be one of {_HIDDEN_ACTIVATIONS}, "
                f"got {self.hidden_activation!r}"
            )
        if self.output_activation not in _OUTPUT_ACTIVATIONS:
            raise ValueError(
                f"output_activation must be one of {_OUTPUT_ACTIVATIONS}, "
                f"got {self.output_activation!r}"
            )

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_widths, 1)

    @property
    def param_count(self) -> int:
        dims = self.layer_dims
        return sum((dims[i] + 1) * dims[i + 1] for i in range(len(dims) - 1))


@dataclass(frozen=True, eq=False)
class Surrogate:
    """An ``MlpSpec`` together with its flat parameter vector."""

    spec: MlpSpec
    params: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.params, dtype=np.float64)
        if p.ndim != 1:
            raise ShapeError(f"params must be a flat vector, got ndim={p.ndim}")
        if p.shape[0] != self.spec.param_count:
            raise ShapeError(
                f"params length {p.shape[0]} does not match spec's "
                f"parameter count {self.spec.param_count}"
            )
        if not np.all(np.isfinite(p)):
            raise ValueError("params contain non-finite entries")
        object.__setattr__(self, "params", p)

    def with_params(self, params: np.ndarray) -> "Surrogate":
        return Surrogate(self.spec, params)


def _unpack(spec: MlpSpec, params: np.ndarray):
    dims = spec.layer_dims
    weights, biases = [], []
    off = 0
    for i in range(len(dims) - 1):
        n_in, n_out = dims[i], dims[i + 1]
        weights.append(params[off : off + n_out * n_in].reshape(n_out, n_in))
        off += n_out * n_in
        biases.append(params[off : off + n_out])
        off += n_out
    return weights, biases


def _hidden_act(tag: str, z: np.ndarray) -> np.ndarray:
    if tag == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _hidden_act_deriv(tag: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    # a is the already-computed activation of z, reused for tanh
    if tag == "relu":
        return (z > 0.0).astype(np.float64)
    return 1.0 - a * a


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class _ForwardCache:
    """Per-layer activations saved by one forward pass over a batch."""

    __slots__ = ("weights", "biases", "acts", "pres", "out")

    def __init__(self, weights, biases, acts, pres, out):
        self.weights = weights
        self.biases = biases
        self.acts = acts  # layer inputs: acts[0] = X, acts[l] = activation of layer l
        self.pres = pres  # pre-activations of hidden layers
        self.out = out    # final outputs, shape (n,)


def _forward(spec: MlpSpec, params: np.ndarray, X: np.ndarray) -> _ForwardCache:
    weights, biases = _unpack(spec, params)
    acts = [X]
    pres = []
    a = X
    for w, b in zip(weights[:-1], biases[:-1]):
        z = a @ w.T + b
        pres.append(z)
        a = _hidden_act(spec.hidden_activation, z)
        acts.append(a)
    z_out = (a @ weights[-1].T + biases[-1])[:, 0]
    out = z_out if spec.output_activation == "identity" else _sigmoid(z_out)
    return _ForwardCache(weights, biases, acts, pres, out)


def _output_delta(spec: MlpSpec, cache: _ForwardCache, seed: np.ndarray) -> np.ndarray:
    if spec.output_activation == "identity":
        return seed
    s = cache.out
    return seed * s * (1.0 - s)


def _param_grad(spec: MlpSpec, cache: _ForwardCache, seed: np.ndarray) -> np.ndarray:
    """Backpropagate per-sample output seeds into a flat parameter gradient.

    Returns the gradient of ``sum_i seed[i] * output_i`` with respect to
    the flat parameter vector.
    """
    grads_w = [None] * len(cache.weights)
    grads_b = [None] * len(cache.biases)
    d = _output_delta(spec, cache, seed)
    grads_w[-1] = d[None, :] @ cache.acts[-1]
    grads_b[-1] = np.array([d.sum()])
    if cache.pres:
        da = np.outer(d, cache.weights[-1][0])
        for l in range(len(cache.pres) - 1, -1, -1):
            dz = da * _hidden_act_deriv(spec.hidden_activation, cache.pres[l], cache.acts[l + 1])
            grads_w[l] = dz.T @ cache.acts[l]
            grads_b[l] = dz.sum(axis=0)
            if l > 0:
                da = dz @ cache.weights[l]
    flat = np.empty(spec.param_count)
    off = 0
    for gw, gb in zip(grads_w, grads_b):
        flat[off : off + gw.size] = gw.ravel()
        off += gw.size
        flat[off : off + gb.size] = gb
        off += gb.size
    return flat


def _input_grad(spec: MlpSpec, cache: _ForwardCache, seed: np.ndarray) -> np.ndarray:
    """Backpropagate per-sample output seeds into per-row input gradients."""
    d = _output_delta(spec, cache, seed)
    da = np.outer(d, cache.weights[-1][0])
    for l in range(len(cache.pres) - 1, -1, -1):
        dz = da * _hidden_act_deriv(spec.hidden_activation, cache.pres[l], cache.acts[l + 1])
        da = dz @ cache.weights[l]
    return da


def _check_batch(spec: MlpSpec, X: np.ndarray, what: str) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise ShapeError(
            f"{what} must have shape (n, {spec.input_dim}), got {X.shape}"
        )
    return X


def predict(s: Surrogate, x: np.ndarray) -> float:
    """Forward pass on one design vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != s.spec.input_dim:
        raise ShapeError(f"x must have shape ({s.spec.input_dim},), got {x.shape}")
    return float(_forward(s.spec, s.params, x[None, :]).out[0])


def predict_batch(s: Surrogate, X: np.ndarray) -> np.ndarray:
    """Forward pass on a matrix of designs; an empty batch yields an empty vector."""
    X = _check_batch(s.spec, X, "X")
    if X.shape[0] == 0:
        return np.empty(0)
    return _forward(s.spec, s.params, X).out


def loss_and_grad(s: Surrogate, X: np.ndarray, z: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over a batch and its exact parameter gradient."""
    X = _check_batch(s.spec, X, "X")
    z = np.asarray(z, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise EmptyInputError("loss_and_grad needs a nonempty batch")
    if z.shape != (n,):
        raise ShapeError(f"z must have shape ({n},), got {z.shape}")
    cache = _forward(s.spec, s.params, X)
    resid = cache.out - z
    loss = float(resid @ resid) / n
    grad = _param_grad(s.spec, cache, (2.0 / n) * resid)
    return loss, grad


def mean_output_grad(s: Surrogate, X: np.ndarray) -> np.ndarray:
    """Exact parameter gradient of the batch-mean prediction."""
    X = _check_batch(s.spec, X, "X")
    n = X.shape[0]
    if n == 0:
        raise EmptyInputError("mean_output_grad needs a nonempty batch")
    cache = _forward(s.spec, s.params, X)
    return _param_grad(s.spec, cache, np.full(n, 1.0 / n))


def loss_and_mean_output_grad(
    s: Surrogate, X: np.ndarray, z: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss, loss gradient, and mean-prediction gradient from one forward pass.

    Equivalent to calling ``loss_and_grad`` and ``mean_output_grad`` on the
    same batch, but the activations are computed once. Training loops use
    this so the extra cost of tracing the mean-prediction gradient is a
    single backward sweep.
    """
    X = _check_batch(s.spec, X, "X")
    z = np.asarray(z, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise EmptyInputError("loss_and_mean_output_grad needs a nonempty batch")
    if z.shape != (n,):
        raise ShapeError(f"z must have shape ({n},), got {z.shape}")
    cache = _forward(s.spec, s.params, X)
    resid = cache.out - z
    loss = float(resid @ resid) / n
    g_loss = _param_grad(s.spec, cache, (2.0 / n) * resid)
    g_mean = _param_grad(s.spec, cache, np.full(n, 1.0 / n))
    return loss, g_loss, g_mean


def input_grad(s: Surrogate, x: np.ndarray) -> np.ndarray:
    """Exact gradient of the prediction with respect to one input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != s.spec.input_dim:
        raise ShapeError(f"x must have shape ({s.spec.input_dim},), got {x.shape}")
    cache = _forward(s.spec, s.params, x[None, :])
    return _input_grad(s.spec, cache, np.ones(1))[0]


def input_grad_batch(s: Surrogate, X: np.ndarray) -> np.ndarray:
    """Per-row input gradients for a whole batch, shape (n, input_dim)."""
    X = _check_batch(s.spec, X, "X")
    if X.shape[0] == 0:
        return np.empty((0, s.spec.input_dim))
    cache = _forward(s.spec, s.params, X)
    return _input_grad(s.spec, cache, np.ones(X.shape[0]))


def axpy(p: np.ndarray, d: np.ndarray, a: float) -> np.ndarray:
    """Elementwise ``p + a * d`` for equal-length flat vectors."""
    p = np.asarray(p, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if p.shape != d.shape:
        raise ShapeError(f"length mismatch: {p.shape} vs {d.shape}")
    return p + a * d


def norm2(p: np.ndarray) -> float:
    """Euclidean norm of a flat vector; 0.0 for the empty vector."""
    return float(np.linalg.norm(np.asarray(p, dtype=np.float64)))


def glorot_limit(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_params(spec: MlpSpec, seed: int) -> np.ndarray:
    """Seeded init: weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero."""
    rng = np.random.default_rng(seed)
    dims = spec.layer_dims
    parts = []
    for i in range(len(dims) - 1):
        n_in, n_out = dims[i], dims[i + 1]
        limit = glorot_limit(n_in, n_out)
        parts.append(rng.uniform(-limit, limit, size=n_out * n_in))
        parts.append(np.zeros(n_out))
    return np.concatenate(parts) if parts else np.empty(0)
