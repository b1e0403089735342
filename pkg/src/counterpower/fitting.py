"""Train any of the four power models from a raw trace.

Classic models are wrapped in :class:`FittedModel`, which carries the schema
and normalization they were trained with so that they can score raw traces.
:class:`~counterpower.tspm.TwoStageModel` already carries both.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import CounterSchema, Dataset, NormalizationParams, fit_normalization
from .errors import SchemaError
from .models import LinearModel, MlpModel, SvrModel
from .models.grid import HyperparamGrid, search_points
from .models.linear import fit_linear
from .models.mlp import fit_mlp
from .models.svr import fit_svr
from .tspm import TwoStageModel, train_tspm

MODEL_KINDS = ("lrpm", "svmpm", "nnpm", "tspm")
_GRID_SECTION = {"svmpm": "svr", "nnpm": "mlp"}


@dataclass(frozen=True)
class FittedModel:
    kind: str
    regressor: Union[LinearModel, SvrModel, MlpModel]
    norm: NormalizationParams
    schema: CounterSchema

    def __post_init__(self):
        if self.norm.names != self.schema.names:
            raise SchemaError("normalization does not match schema")

    @property
    def n_features(self) -> int:
        return self.schema.n

    def predict_normalized(self, X: np.ndarray) -> np.ndarray:
        return self.regressor.predict(np.atleast_2d(X))

    def predict_raw(self, counters: np.ndarray) -> np.ndarray:
        return self.predict_normalized(self.norm.apply(np.atleast_2d(counters)))


PowerModel = Union[FittedModel, TwoStageModel]


def model_kind(model: PowerModel) -> str:
    return "tspm" if isinstance(model, TwoStageModel) else model.kind


def fit_power_model(kind: str, train: Dataset, *, norm: Optional[NormalizationParams] = None,
                    hp: Optional[dict] = None, grid: Optional[HyperparamGrid] = None,
                    folds: int = 3, rng_seed: int = 0,
                    fit_intercept: bool = True) -> PowerModel:
    """Fit ``kind`` on raw training vectors.

    Normalization is fitted on ``train`` unless given.  When ``grid`` has
    points for the model (SVR points for ``svmpm`` and ``tspm``, MLP points
    for ``nnpm``) they are searched by ``folds``-fold CV and ``hp`` is ignored.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    if norm is None:
        norm = fit_normalization(train)
    if kind == "tspm":
        return train_tspm(train, hp, svr_grid=grid, folds=folds, norm=norm,
                          fit_intercept=fit_intercept)

    data = train.normalized(norm)
    X, y = data.counters, data.power
    hp = dict(hp or {})
    section = _GRID_SECTION.get(kind)
    if grid is not None and section and getattr(grid, section):
        hp = search_points(section, X, y, getattr(grid, section), folds, rng_seed).best
    if kind == "lrpm":
        reg = fit_linear(X, y, fit_intercept)
    elif kind == "svmpm":
        reg = fit_svr(X, y, **hp)
    else:
        reg = fit_mlp(X, y, rng_seed=rng_seed, **hp)
    return FittedModel(kind, reg, norm, train.schema)
