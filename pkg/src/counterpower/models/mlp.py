"""One-hidden-layer tanh network trained by full-batch gradient descent on MSE.

Targets are standardized before training and the output layer is rescaled
afterwards, so ``lr`` does not depend on the power scale of the trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import Dataset
from ..errors import DivergenceError

PARAM_NAMES = ("W1", "b1", "w2", "b2")


@dataclass(frozen=True)
class MlpModel:
    W1: np.ndarray = field(repr=False)   # (h, n)
    b1: np.ndarray = field(repr=False)   # (h,)
    w2: np.ndarray = field(repr=False)   # (h,)
    b2: float = 0.0
    initial_mse: float = float("nan")
    final_mse: float = float("nan")

    def __post_init__(self):
        for name in ("W1", "b1", "w2"):
            a = np.array(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "b2", float(self.b2))

    @property
    def hidden(self) -> int:
        return len(self.b1)

    @property
    def n_features(self) -> int:
        return self.W1.shape[1]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return forward(self.params(), np.atleast_2d(X))[0]

    def params(self) -> dict:
        return {"W1": self.W1, "b1": self.b1, "w2": self.w2, "b2": np.float64(self.b2)}

    def __eq__(self, other):
        if not isinstance(other, MlpModel):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in
                   zip(self.params().values(), other.params().values()))


def forward(params: dict, X: np.ndarray):
    hidden = np.tanh(X @ params["W1"].T + params["b1"])
    return hidden @ params["w2"] + params["b2"], hidden


def loss_and_grad(params: dict, X: np.ndarray, y: np.ndarray):
    """Mean squared error and its gradient by backpropagation."""
    out, hidden = forward(params, X)
    r = out - y
    loss = float(np.mean(r * r))
    d_out = 2.0 * r / len(y)
    d_hidden = np.outer(d_out, params["w2"]) * (1.0 - hidden * hidden)
    grads = {
        "W1": d_hidden.T @ X,
        "b1": d_hidden.sum(axis=0),
        "w2": hidden.T @ d_out,
        "b2": np.float64(d_out.sum()),
    }
    return loss, grads


def numerical_grad(params: dict, X: np.ndarray, y: np.ndarray, step: float = 1e-5) -> dict:
    """Central finite differences of the MSE, one parameter at a time."""
    grads = {}
    for name in PARAM_NAMES:
        base = np.array(params[name], dtype=np.float64)
        g = np.zeros_like(base)
        for k in np.ndindex(base.shape):
            shifted = dict(params)
            plus, minus = base.copy(), base.copy()
            plus[k] += step
            minus[k] -= step
            shifted[name] = plus
            lp = loss_and_grad(shifted, X, y)[0]
            shifted[name] = minus
            lm = loss_and_grad(shifted, X, y)[0]
            g[k] = (lp - lm) / (2.0 * step)
        grads[name] = g
    return grads


def gradient_check(params: dict, X: np.ndarray, y: np.ndarray, step: float = 1e-5) -> float:
    """Largest relative gap between backprop and finite-difference gradients."""
    analytic = loss_and_grad(params, X, y)[1]
    numeric = numerical_grad(params, X, y, step)
    worst = 0.0
    for name in PARAM_NAMES:
        a = np.ravel(analytic[name])
        n = np.ravel(numeric[name])
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def init_params(n_features: int, hidden: int, rng: np.random.Generator,
                scale: float = 1.0) -> dict:
    return {
        "W1": rng.normal(0.0, scale / np.sqrt(n_features), size=(hidden, n_features)),
        "b1": rng.normal(0.0, scale, size=hidden) * 0.1,
        "w2": rng.normal(0.0, scale / np.sqrt(hidden), size=hidden),
        "b2": np.float64(0.0),
    }


def fit_mlp(X: np.ndarray, y: np.ndarray, hidden: int = 8, lr: float = 0.1,
            epochs: int = 2000, rng_seed: int = 0, init_scale: float = 1.0) -> MlpModel:
    """Array-level training; see :func:`train_mlp`."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if len(y) < 2:
        raise ValueError("MLP training needs at least 2 vectors")
    if hidden < 1 or epochs < 0 or not lr > 0:
        raise ValueError("need hidden >= 1, epochs >= 0 and lr > 0")
    mu = float(y.mean())
    sigma = float(y.std()) or 1.0
    z = (y - mu) / sigma

    rng = np.random.default_rng(rng_seed)
    params = init_params(X.shape[1], hidden, rng, init_scale)
    initial = loss_and_grad(params, X, z)[0]
    best, final = dict(params), initial
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(epochs + 1):
            loss, grads = loss_and_grad(params, X, z)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"loss became non-finite at epoch {epoch}; try a smaller lr than {lr}")
            if loss < final:
                best, final = dict(params), loss
            if epoch == epochs:
                break
            for name in PARAM_NAMES:
                params[name] = params[name] - lr * grads[name]
    params = best
    # undo the target standardization in the output layer
    return MlpModel(params["W1"], params["b1"], params["w2"] * sigma,
                    float(params["b2"]) * sigma + mu,
                    initial * sigma * sigma, final * sigma * sigma)


def train_mlp(data: Dataset, hidden: int = 8, lr: float = 0.1, epochs: int = 2000,
              rng_seed: int = 0, init_scale: float = 1.0) -> MlpModel:
    """Fit the network to power on normalized counters.

    ``init_scale=0`` starts from all-zero weights, in which case the network
    predicts the mean training power until trained.
    """
    return fit_mlp(data.counters, data.power, hidden, lr, epochs, rng_seed, init_scale)
