"""Two-stage power model: a linear base estimate refined by an SVR on its residuals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import CounterSchema, CounterVector, Dataset, NormalizationParams, fit_normalization
from .errors import SchemaError
from .models.grid import HyperparamGrid, search_points
from .models.linear import LinearModel, fit_linear
from .models.svr import SvrModel, fit_svr


@dataclass(frozen=True)
class TwoStageModel:
    base: LinearModel
    diff: SvrModel
    norm: NormalizationParams
    schema: CounterSchema

    def __post_init__(self):
        if self.norm.names != self.schema.names:
            raise SchemaError("normalization does not match schema")
        if self.base.n_features != self.schema.n or self.diff.n_features != self.schema.n:
            raise SchemaError("sub-model arity does not match schema")

    @property
    def n_features(self) -> int:
        return self.schema.n

    def predict_normalized(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return self.base.predict(X) + self.diff.predict(X)

    def predict_raw(self, counters: np.ndarray) -> np.ndarray:
        return self.predict_normalized(self.norm.apply(np.atleast_2d(counters)))


def difference_targets(base: LinearModel, data: Dataset) -> np.ndarray:
    """Measured power minus the base model's estimate, per training vector."""
    return data.power - base.predict(data.counters)


def train_tspm(training_vectors: Dataset, svr_hp: Optional[dict] = None, *,
               svr_grid: Optional[HyperparamGrid] = None, folds: int = 3,
               norm: Optional[NormalizationParams] = None,
               fit_intercept: bool = True) -> TwoStageModel:
    """Fit the linear base, then an SVR to what the base gets wrong.

    ``training_vectors`` holds raw counts; the normalization is fitted on it
    unless ``norm`` is given.  With ``svr_grid`` the difference model's
    hyperparameters are chosen by cross-validation on the residual targets,
    otherwise ``svr_hp`` (or the SVR defaults) is used.
    """
    if training_vectors.norm is not None:
        raise ValueError("train_tspm expects raw counts")
    if norm is None:
        norm = fit_normalization(training_vectors)
    data = training_vectors.normalized(norm)
    base = fit_linear(data.counters, data.power, fit_intercept)
    residual = difference_targets(base, data)
    hp = dict(svr_hp or {})
    if svr_grid is not None and svr_grid.svr:
        hp = search_points("svr", data.counters, residual, svr_grid.svr, folds).best
    diff = fit_svr(data.counters, residual, **hp)
    return TwoStageModel(base, diff, norm, training_vectors.schema)


def predict_tspm(m: TwoStageModel, v: Union[CounterVector, np.ndarray]) -> float:
    """Power for one raw vector: base estimate plus predicted difference."""
    counters = np.asarray(v.counters if isinstance(v, CounterVector) else v, dtype=np.float64)
    if counters.shape != (m.schema.n,):
        raise SchemaError(f"expected {m.schema.n} counters, got shape {counters.shape}")
    x = m.norm.apply(counters).reshape(1, -1)
    basic_value = float(m.base.predict(x)[0])
    difference = float(m.diff.predict(x)[0])
    return basic_value + difference
