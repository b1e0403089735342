"""Epsilon support vector regression trained by sequential minimal optimization.

The dual is solved in the usual doubled form over ``beta = [alpha; alpha*]``::

    min  1/2 beta' Q beta + p' beta
    s.t. sum_i s_i beta_i = 0,   0 <= beta_i <= C

with signs ``s = [+1..., -1...]``, ``Q_ij = s_i s_j K(x_i, x_j)`` and
``p = [eps - y; eps + y]``.  Working pairs are chosen by maximal violation
for the first index and second-order gain for the second; iteration stops
once the maximal KKT violation drops below ``tol``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from ..core import Dataset
from ..errors import ConvergenceError

TAU = 1e-12
DEFAULT_C = 10.0
DEFAULT_TOL = 1e-3
EPSILON_FRACTION = 0.01
KERNELS = ("linear", "rbf")


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    dot = A @ B.T
    if kernel == "linear":
        return dot
    if kernel == "rbf":
        sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * dot
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")


def default_epsilon(y: np.ndarray) -> float:
    y = np.asarray(y)
    return EPSILON_FRACTION * float(y.max() - y.min()) if len(y) else 0.0


@dataclass(frozen=True)
class SvrModel:
    support_vectors: np.ndarray = field(repr=False)
    dual_coef: np.ndarray = field(repr=False)
    bias: float = 0.0
    kernel: str = "rbf"
    gamma: float = 1.0
    C: float = DEFAULT_C
    epsilon: float = 0.0
    n_features: int = 0
    objective: float = 0.0
    iterations: int = 0

    def __post_init__(self):
        sv = np.array(self.support_vectors, dtype=np.float64).reshape(-1, self.n_features)
        coef = np.array(self.dual_coef, dtype=np.float64).reshape(-1)
        sv.setflags(write=False)
        coef.setflags(write=False)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "dual_coef", coef)

    @property
    def n_support(self) -> int:
        return len(self.dual_coef)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.n_support == 0:
            return np.full(X.shape[0], self.bias)
        return kernel_matrix(X, self.support_vectors, self.kernel, self.gamma) @ self.dual_coef + self.bias

    def __eq__(self, other):
        if not isinstance(other, SvrModel):
            return NotImplemented
        return (np.array_equal(self.support_vectors, other.support_vectors)
                and np.array_equal(self.dual_coef, other.dual_coef)
                and (self.bias, self.kernel, self.gamma, self.C, self.epsilon)
                == (other.bias, other.kernel, other.gamma, other.C, other.epsilon))


@dataclass
class SmoResult:
    """Raw solver output, before support vectors are extracted."""

    beta: np.ndarray
    gradient: np.ndarray
    rho: float
    objective: float
    iterations: int


def dual_objective(coef, K, y, epsilon) -> float:
    """Epsilon-SVR dual objective written in terms of ``coef = alpha - alpha*``.

    Assumes complementary pairs (``alpha_i * alpha*_i == 0``), which any optimum has.
    """
    coef = np.asarray(coef)
    return float(0.5 * coef @ K @ coef + epsilon * np.abs(coef).sum() - y @ coef)


@njit(cache=True)
def _smo_loop(K, y, C, epsilon, tol, max_iter):
    # beta[k] = alpha_k (sign +1), beta[k + l] = alpha*_k (sign -1)
    l = y.shape[0]
    beta = np.zeros(2 * l)
    G = np.empty(2 * l)
    for k in range(l):
        G[k] = epsilon - y[k]
        G[k + l] = epsilon + y[k]
    it = 0
    converged = False
    while True:
        # first index: maximal violator among variables that may move "up"
        i = -1
        gmax = -np.inf
        for k in range(l):
            if beta[k] < C and -G[k] >= gmax:
                gmax = -G[k]
                i = k
            if beta[k + l] > 0 and G[k + l] >= gmax:
                gmax = G[k + l]
                i = k + l
        if i == -1:
            converged = True
            break
        ki = i if i < l else i - l
        Kii = K[ki, ki]
        # second index: largest second-order decrease among "low" variables
        j = -1
        gmax2 = -np.inf
        best = np.inf
        for k in range(l):
            quad = Kii + K[k, k] - 2.0 * K[ki, k]
            if quad <= 0:
                quad = TAU
            if beta[k] > 0:
                sg = G[k]
                if sg >= gmax2:
                    gmax2 = sg
                gd = gmax + sg
                if gd > 0:
                    obj = -(gd * gd) / quad
                    if obj <= best:
                        best = obj
                        j = k
            if beta[k + l] < C:
                sg = -G[k + l]
                if sg >= gmax2:
                    gmax2 = sg
                gd = gmax + sg
                if gd > 0:
                    obj = -(gd * gd) / quad
                    if obj <= best:
                        best = obj
                        j = k + l
        if gmax + gmax2 < tol or j == -1:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1

        kj = j if j < l else j - l
        si = 1.0 if i < l else -1.0
        sj = 1.0 if j < l else -1.0
        q = Kii + K[kj, kj] - 2.0 * K[ki, kj]
        if q <= 0:
            q = TAU
        ai = beta[i]
        aj = beta[j]
        if si != sj:
            delta = (-G[i] - G[j]) / q
            diff = ai - aj
            ni = ai + delta
            nj = aj + delta
            if diff > 0:
                if nj < 0:
                    nj = 0.0
                    ni = diff
            elif ni < 0:
                ni = 0.0
                nj = -diff
            if diff > 0:
                if ni > C:
                    ni = C
                    nj = C - diff
            elif nj > C:
                nj = C
                ni = C + diff
        else:
            delta = (G[i] - G[j]) / q
            total = ai + aj
            ni = ai - delta
            nj = aj + delta
            if total > C:
                if ni > C:
                    ni = C
                    nj = total - C
            elif nj < 0:
                nj = 0.0
                ni = total
            if total > C:
                if nj > C:
                    nj = C
                    ni = total - C
            elif ni < 0:
                ni = 0.0
                nj = total
        beta[i] = ni
        beta[j] = nj
        # G_t += s_t * (s_i K_it d_i + s_j K_jt d_j)
        di = (ni - ai) * si
        dj = (nj - aj) * sj
        for k in range(l):
            g = K[ki, k] * di + K[kj, k] * dj
            G[k] += g
            G[k + l] -= g
    return beta, G, it, converged


def solve_smo(K: np.ndarray, y: np.ndarray, C: float, epsilon: float,
              tol: float = DEFAULT_TOL, max_iter: Optional[int] = None) -> SmoResult:
    """Run SMO on a precomputed kernel matrix."""
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    l = len(y)
    if max_iter is None:
        max_iter = max(10_000_000, 100 * l)
    beta, G, it, converged = _smo_loop(K, y, float(C), float(epsilon), float(tol), int(max_iter))
    if not converged:
        raise ConvergenceError("SMO did not reach the KKT tolerance", it)
    s = np.concatenate([np.ones(l), -np.ones(l)])
    p = np.concatenate([epsilon - y, epsilon + y])
    rho = _compute_rho(beta, G, s, C)
    objective = 0.5 * float(beta @ (G + p))
    return SmoResult(beta, G, rho, objective, it)


def _compute_rho(beta, G, s, C) -> float:
    sG = s * G
    at_upper = beta >= C
    at_lower = beta <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        return float(sG[free].mean())
    # bounds from variables pinned at 0 or C
    ub_mask = (at_upper & (s < 0)) | (at_lower & (s > 0))
    lb_mask = (at_upper & (s > 0)) | (at_lower & (s < 0))
    ub = sG[ub_mask].min() if ub_mask.any() else np.inf
    lb = sG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


def fit_svr(X: np.ndarray, y: np.ndarray, C: float = DEFAULT_C,
            epsilon: Optional[float] = None, kernel: str = "rbf",
            gamma: Optional[float] = None, tol: float = DEFAULT_TOL,
            max_iter: Optional[int] = None) -> SvrModel:
    """Array-level SVR training; ``y`` may be any real target (e.g. residuals).

    ``epsilon=None`` uses 1% of the target range; ``gamma=None`` uses
    ``1 / n_features``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if len(y) < 1:
        raise ValueError("SVR needs at least one training vector")
    if not C > 0:
        raise ValueError("C must be positive")
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    eps = default_epsilon(y) if epsilon is None else float(epsilon)
    if eps < 0:
        raise ValueError("epsilon must be non-negative")
    n_features = X.shape[1]
    g = 1.0 / n_features if gamma is None else float(gamma)

    K = kernel_matrix(X, X, kernel, g)
    res = solve_smo(K, y, C, eps, tol, max_iter)
    l = len(y)
    coef = res.beta[:l] - res.beta[l:]
    sv = coef != 0
    return SvrModel(X[sv], coef[sv], -res.rho, kernel, g, float(C), eps, n_features,
                    res.objective, res.iterations)


def train_svr(data: Dataset, C: float = DEFAULT_C, epsilon: Optional[float] = None,
              kernel: str = "rbf", gamma: Optional[float] = None, **kwargs) -> SvrModel:
    """Fit an epsilon-SVR of power on normalized counters.

    Raises :class:`ConvergenceError` if SMO exceeds its iteration cap.
    """
    if len(data) < 1:
        raise ValueError("SVR needs at least one training vector")
    return fit_svr(data.counters, data.power, C, epsilon, kernel, gamma, **kwargs)
