"""Processor power modelling from hardware performance counter traces.

Pipeline: read (or synthesize) a counter trace, select the counters most
related to power with partition-averaged random-forest importance, then fit
linear, SVR, MLP or two-stage (linear + SVR residual) power models and
compare them on Known/Unknown vectors.
"""

from .core import (CounterSchema, CounterVector, Dataset, NormalizationParams,
                   fit_normalization, normalize)
from .errors import (ConvergenceError, DivergenceError, ModelFormatError, PowerModelError,
                     SchemaError, TraceFormatError)
from .evaluation import EvalReport, ErrorStats, SplitPlan, compare_report, compute_error, evaluate
from .fitting import MODEL_KINDS, FittedModel, fit_power_model
from .forest import ForestModel, predict_forest, train_forest
from .hcs import HcsConfig, SelectionResult, select_counters, selection_stability
from .ingestion import (GroundTruth, SyntheticSpec, generate_synthetic, read_trace,
                        write_trace)
from .models import (HyperparamGrid, LinearModel, MlpModel, SvrModel, grid_search, predict,
                     train_linear, train_mlp, train_svr)
from .serialize import load_model, save_model
from .tspm import TwoStageModel, predict_tspm, train_tspm

__version__ = "0.1.0"
