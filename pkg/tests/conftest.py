"""Shared numeric oracles for the test suite."""

import numpy as np
import pytest

from sharpcap import MlpSpec, Surrogate, init_params


def central_diff_grad(f, x0, step=1e-5):
    """Central finite-difference gradient of a scalar function."""
    x0 = np.asarray(x0, dtype=np.float64)
    g = np.empty_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def max_rel_err(a, b, floor=1e-8):
    """Worst per-coordinate relative error, floored to ignore dead coordinates."""
    a = np.asarray(a)
    b = np.asarray(b)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def random_surrogate(rng, input_dim=None, hidden=None, activation=None, output="identity"):
    """A small random surrogate with parameters drawn by the standard init."""
    if input_dim is None:
        input_dim = int(rng.integers(1, 6))
    if hidden is None:
        hidden = tuple(int(w) for w in rng.integers(1, 9, size=rng.integers(0, 3)))
    if activation is None:
        activation = str(rng.choice(["relu", "tanh"]))
    spec = MlpSpec(
        input_dim=input_dim,
        hidden_widths=hidden,
        hidden_activation=activation,
        output_activation=output,
    )
    params = init_params(spec, int(rng.integers(0, 2**31)))
    return Surrogate(spec, params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
