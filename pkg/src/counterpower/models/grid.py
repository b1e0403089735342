"""Cross-validated grid search over SVR and MLP hyperparameters."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ..core import Dataset
from ..errors import ConvergenceError, DivergenceError
from .mlp import fit_mlp
from .svr import fit_svr

SVR_KEYS = ("C", "epsilon", "gamma", "kernel")
MLP_KEYS = ("hidden", "lr", "epochs")


def _expand(spec) -> tuple[dict, ...]:
    """Accept a list of points or a ``{key: [values...]}`` product."""
    if isinstance(spec, Mapping):
        keys = list(spec)
        values = [v if isinstance(v, (list, tuple)) else [v] for v in spec.values()]
        return tuple(dict(zip(keys, combo)) for combo in itertools.product(*values))
    return tuple(dict(p) for p in spec)


def _check_keys(points, allowed, what):
    for p in points:
        extra = set(p) - set(allowed)
        if extra:
            raise ValueError(f"unknown {what} hyperparameters: {', '.join(sorted(extra))}")


@dataclass(frozen=True)
class HyperparamGrid:
    svr: tuple = field(default_factory=tuple)
    mlp: tuple = field(default_factory=tuple)

    def __post_init__(self):
        svr, mlp = _expand(self.svr), _expand(self.mlp)
        _check_keys(svr, SVR_KEYS, "SVR")
        _check_keys(mlp, MLP_KEYS, "MLP")
        object.__setattr__(self, "svr", svr)
        object.__setattr__(self, "mlp", mlp)

    @classmethod
    def from_dict(cls, d: Mapping) -> "HyperparamGrid":
        unknown = set(d) - {"svr", "mlp"}
        if unknown:
            raise ValueError(f"unknown grid sections: {', '.join(sorted(unknown))}")
        return cls(d.get("svr", ()), d.get("mlp", ()))

    @classmethod
    def from_json(cls, path) -> "HyperparamGrid":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def default_grid() -> HyperparamGrid:
    return HyperparamGrid(
        svr={"C": [1.0, 10.0, 100.0], "gamma": [None, 2.0], "kernel": ["rbf"]},
        mlp={"hidden": [8], "lr": [0.1, 0.3], "epochs": [2000]},
    )


def contiguous_folds(n: int, folds: int) -> list[np.ndarray]:
    bounds = np.linspace(0, n, folds + 1).astype(int)
    return [np.arange(bounds[k], bounds[k + 1]) for k in range(folds)]


def fit_point(kind: str, X, y, point: dict, rng_seed: int = 0):
    if kind == "svr":
        return fit_svr(X, y, **point)
    if kind == "mlp":
        return fit_mlp(X, y, rng_seed=rng_seed, **point)
    raise ValueError(f"no grid search for model kind {kind!r}")


def cv_mse(kind: str, X, y, point: dict, folds: int, rng_seed: int = 0) -> float:
    n = len(y)
    errs = []
    for test in contiguous_folds(n, folds):
        train = np.setdiff1d(np.arange(n), test, assume_unique=True)
        model = fit_point(kind, X[train], y[train], point, rng_seed)
        r = model.predict(X[test]) - y[test]
        errs.append(float(np.mean(r * r)))
    return float(np.mean(errs))


@dataclass(frozen=True)
class GridResult:
    kind: str
    best: dict
    scores: tuple[tuple[dict, float], ...]


def search_points(kind: str, X, y, points: Sequence[dict], folds: int,
                  rng_seed: int = 0) -> GridResult:
    """Argmin of mean CV MSE over ``points``; earlier points win ties.

    A point whose training diverges or hits the iteration cap on any fold
    scores ``inf`` and cannot be chosen.
    """
    if not points:
        raise ValueError(f"empty {kind} grid")
    if folds < 2:
        raise ValueError("grid search needs at least 2 folds")
    if len(y) < folds:
        raise ValueError(f"{len(y)} vectors cannot be split into {folds} folds")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    scores = []
    best, best_score = None, np.inf
    for point in points:
        try:
            score = cv_mse(kind, X, y, point, folds, rng_seed)
        except (ConvergenceError, DivergenceError):
            score = np.inf
        scores.append((dict(point), score))
        if score < best_score:
            best, best_score = dict(point), score
    if best is None:
        raise ValueError(f"every {kind} grid point failed to train or scored non-finite")
    return GridResult(kind, best, tuple(scores))


def grid_search(data: Dataset, grid: HyperparamGrid, folds: int = 3,
                rng_seed: int = 0, kinds: Optional[Sequence[str]] = None) -> dict:
    """Best hyperparameters per tuned model kind (``"svr"``, ``"mlp"``).

    ``data`` should already be normalized.  Folds are contiguous blocks in
    trace order.
    """
    if not grid.svr and not grid.mlp:
        raise ValueError("empty hyperparameter grid")
    wanted = kinds if kinds is not None else [k for k in ("svr", "mlp") if getattr(grid, k)]
    return {kind: search_points(kind, data.counters, data.power, getattr(grid, kind),
                                folds, rng_seed)
            for kind in wanted}
