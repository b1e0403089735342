"""Linear regression power model (least squares on normalized counters)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import Dataset

RIDGE_JITTER = 1e-8
# condition number past which the Gram matrix is treated as singular
_MAX_COND = 1e12


@dataclass(frozen=True)
class LinearModel:
    coeffs: np.ndarray = field(repr=False)
    intercept: float = 0.0
    ridge: float = 0.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def n_features(self) -> int:
        return len(self.coeffs)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X) @ self.coeffs + self.intercept

    def __eq__(self, other):
        if not isinstance(other, LinearModel):
            return NotImplemented
        return (np.array_equal(self.coeffs, other.coeffs)
                and self.intercept == other.intercept and self.ridge == other.ridge)


def solve_normal_equations(A: np.ndarray, y: np.ndarray, penalize=None):
    """Least squares via ``(A^T A) w = A^T y``.

    If the Gram matrix is singular or badly conditioned, ``RIDGE_JITTER`` is
    added to the diagonal entries flagged in ``penalize`` (all by default).
    Returns ``(w, ridge)``.
    """
    G = A.T @ A
    b = A.T @ y
    ridge = 0.0
    if np.linalg.cond(G) > _MAX_COND:
        ridge = RIDGE_JITTER
        mask = np.ones(G.shape[0], bool) if penalize is None else np.asarray(penalize)
        G = G + np.diag(np.where(mask, ridge * max(1.0, np.trace(G) / len(G)), 0.0))
    try:
        w = np.linalg.solve(G, b)
    except np.linalg.LinAlgError:
        w = np.linalg.lstsq(G, b, rcond=None)[0]
    return w, ridge


def fit_linear(X: np.ndarray, y: np.ndarray, fit_intercept: bool = True) -> LinearModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, k = X.shape
    if fit_intercept:
        A = np.hstack([X, np.ones((n, 1))])
        w, ridge = solve_normal_equations(A, y, penalize=[True] * k + [False])
        return LinearModel(w[:k], float(w[k]), ridge)
    w, ridge = solve_normal_equations(X, y)
    return LinearModel(w, 0.0, ridge)


def train_linear(data: Dataset, fit_intercept: bool = True) -> LinearModel:
    """OLS fit of power on normalized counters.

    ``fit_intercept=False`` gives the pure form with no constant term.
    """
    needed = data.schema.n + (1 if fit_intercept else 0)
    if len(data) < needed:
        raise ValueError(f"linear fit needs at least {needed} vectors, got {len(data)}")
    return fit_linear(data.counters, data.power, fit_intercept)
