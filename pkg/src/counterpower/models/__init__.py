"""Classic power models: linear regression, epsilon-SVR and a one-layer MLP."""

from typing import Union

import numpy as np

from ..core import CounterVector
from ..errors import SchemaError
from .grid import GridResult, HyperparamGrid, default_grid, grid_search
from .linear import LinearModel, fit_linear, train_linear
from .mlp import MlpModel, fit_mlp, gradient_check, train_mlp
from .svr import SvrModel, fit_svr, kernel_matrix, train_svr

RegressionModel = Union[LinearModel, SvrModel, MlpModel]


def predict(model: RegressionModel, v) -> float:
    """Power (W) for one normalized vector (a :class:`CounterVector` or 1-D array)."""
    x = np.asarray(v.counters if isinstance(v, CounterVector) else v, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict takes a single vector; use model.predict for batches")
    if x.shape[0] != model.n_features:
        raise SchemaError(f"model expects {model.n_features} counters, got {x.shape[0]}")
    return float(model.predict(x.reshape(1, -1))[0])


__all__ = [
    "GridResult", "HyperparamGrid", "LinearModel", "MlpModel", "RegressionModel",
    "SvrModel", "default_grid", "fit_linear", "fit_mlp", "fit_svr", "gradient_check",
    "grid_search", "kernel_matrix", "predict", "train_linear", "train_mlp", "train_svr",
]
