"""Known/Unknown evaluation of power models and comparison reports.

The trace is cut into ``n_parts`` contiguous parts.  In rotation ``r`` part
``r`` is held out: models are fitted (normalization included) on the other
parts and scored on the vectors they were trained on ("Known") and on the
held-out part ("Unknown").  Every rotation is run and the per-rotation mean
errors are averaged into an ``agg`` row.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .core import Dataset, NormalizationParams, fit_normalization
from .fitting import MODEL_KINDS, fit_power_model
from .hcs import partition_bounds
from .models.grid import HyperparamGrid

CDF_THRESHOLDS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)
ZERO_POWER_FLOOR = 1e-6
SPLITS = ("Known", "Unknown")
REPORT_HEADER = "model,split,rotation,mean_error," + ",".join(
    f"p_lt_{round(t * 100)}" for t in CDF_THRESHOLDS)

Trainer = Callable[[Dataset, NormalizationParams], object]


def compute_error(estimated: float, measured: float) -> float:
    """Relative error ``|est - meas| / meas``, with ``meas`` floored at 1 uW."""
    if measured < 0:
        raise ValueError("measured power must be non-negative")
    return abs(estimated - measured) / max(measured, ZERO_POWER_FLOOR)


@dataclass(frozen=True)
class ErrorStats:
    errors: np.ndarray = field(repr=False)
    mean_error: float
    cdf_buckets: tuple[float, ...]
    n_floored: int = 0
    n_negative: int = 0

    @classmethod
    def from_predictions(cls, estimated, measured) -> "ErrorStats":
        est = np.asarray(estimated, dtype=np.float64)
        meas = np.asarray(measured, dtype=np.float64)
        if np.any(meas < 0):
            raise ValueError("measured power must be non-negative")
        if len(meas) == 0:
            raise ValueError("no vectors to score")
        errors = np.abs(est - meas) / np.maximum(meas, ZERO_POWER_FLOOR)
        errors.setflags(write=False)
        buckets = tuple(float(np.mean(errors < t)) for t in CDF_THRESHOLDS)
        return cls(errors, float(np.mean(errors)), buckets,
                   int(np.sum(meas < ZERO_POWER_FLOOR)), int(np.sum(est < 0)))

    @property
    def n(self) -> int:
        return len(self.errors)

    def __eq__(self, other):
        if not isinstance(other, ErrorStats):
            return NotImplemented
        return (np.array_equal(self.errors, other.errors)
                and (self.mean_error, self.cdf_buckets, self.n_floored, self.n_negative)
                == (other.mean_error, other.cdf_buckets, other.n_floored, other.n_negative))


@dataclass(frozen=True)
class SplitPlan:
    n_parts: int = 4
    rotation: int = 0

    def __post_init__(self):
        if self.n_parts < 2:
            raise ValueError("need at least 2 parts")
        if not 0 <= self.rotation < self.n_parts:
            raise ValueError(f"rotation must lie in [0, {self.n_parts})")

    def parts(self, n_vectors: int) -> list[np.ndarray]:
        if n_vectors < self.n_parts:
            raise ValueError(f"{n_vectors} vectors cannot fill {self.n_parts} parts")
        return [np.arange(lo, hi) for lo, hi in partition_bounds(n_vectors, self.n_parts)]

    def known_unknown(self, n_vectors: int) -> tuple[np.ndarray, np.ndarray]:
        parts = self.parts(n_vectors)
        test = parts[self.rotation]
        train = np.concatenate([p for k, p in enumerate(parts) if k != self.rotation])
        return train, test


@dataclass(frozen=True)
class RotationInfo:
    rotation: int
    known: np.ndarray = field(repr=False)
    unknown: np.ndarray = field(repr=False)
    norm: NormalizationParams = field(repr=False)


@dataclass(frozen=True)
class EvalReport:
    models: tuple[str, ...]
    n_parts: int
    cells: Mapping = field(repr=False)          # (model, split, rotation) -> ErrorStats
    rotations: tuple[RotationInfo, ...] = field(repr=False, default=())

    def stats(self, model: str, split: str, rotation: int) -> ErrorStats:
        return self.cells[(model, split, rotation)]

    @property
    def rotation_ids(self) -> tuple[int, ...]:
        return tuple(r.rotation for r in self.rotations)

    def aggregate(self, model: str, split: str) -> tuple[float, tuple[float, ...]]:
        """Mean over rotations of the mean error and of each CDF bucket."""
        cells = [self.cells[(model, split, r)] for r in self.rotation_ids]
        mean = float(np.mean([c.mean_error for c in cells]))
        buckets = tuple(float(np.mean([c.cdf_buckets[k] for c in cells]))
                        for k in range(len(CDF_THRESHOLDS)))
        return mean, buckets

    def mean_error(self, model: str, split: str) -> float:
        return self.aggregate(model, split)[0]


class ProtocolError(AssertionError):
    """The Known/Unknown protocol was violated (overlap, leakage, bad split)."""


def _require(cond, message):
    if not cond:
        raise ProtocolError(message)


def _check_rotation(data: Dataset, known, unknown, norm, n_parts):
    n = len(data)
    _require(len(np.intersect1d(known, unknown)) == 0, "Known and Unknown overlap")
    _require(len(known) + len(unknown) == n, "parts do not cover the trace")
    if n % n_parts == 0:
        _require(len(unknown) * n_parts == n and len(known) * n_parts == n * (n_parts - 1),
                 f"Unknown is not 1/{n_parts} of the trace")
    # normalization extrema must come from training vectors only
    train = data.counters[known]
    _require(np.array_equal(norm.mins, train.min(axis=0))
             and np.array_equal(norm.maxs, train.max(axis=0)),
             "normalization extrema do not come from the training vectors")


def kind_trainer(kind: str, *, hp: Optional[dict] = None,
                 grid: Optional[HyperparamGrid] = None, folds: int = 3,
                 rng_seed: int = 0, fit_intercept: bool = True) -> Trainer:
    def train(data: Dataset, norm: NormalizationParams):
        return fit_power_model(kind, data, norm=norm, hp=hp, grid=grid, folds=folds,
                               rng_seed=rng_seed, fit_intercept=fit_intercept)
    return train


def evaluate(models: Union[Sequence[str], Mapping[str, Trainer]], data: Dataset,
             n_parts: int = 4, rotations: Optional[Sequence[int]] = None, *,
             grid: Optional[HyperparamGrid] = None, hp: Optional[Mapping] = None,
             folds: int = 3, rng_seed: int = 0) -> EvalReport:
    """Score models on Known and Unknown vectors for each rotation.

    ``models`` is either a list of kinds from ``MODEL_KINDS`` or a mapping of
    name to ``trainer(train_data, norm)`` returning anything with a
    ``predict_raw(counters)`` method.  ``grid``/``hp`` (per-kind dict) are
    passed through to kind-based trainers.
    """
    if data.norm is not None:
        raise ValueError("evaluate expects raw counts")
    if isinstance(models, Mapping):
        trainers = dict(models)
    else:
        hp = hp or {}
        trainers = {}
        for kind in models:
            if kind not in MODEL_KINDS:
                raise ValueError(f"unknown model kind {kind!r}")
            trainers[kind] = kind_trainer(kind, hp=hp.get(kind), grid=grid, folds=folds,
                                          rng_seed=rng_seed)
    if not trainers:
        raise ValueError("no models to evaluate")
    rotations = range(n_parts) if rotations is None else rotations

    cells = {}
    infos = []
    for r in rotations:
        known, unknown = SplitPlan(n_parts, r).known_unknown(len(data))
        train = data.subset(known)
        norm = fit_normalization(train)
        _check_rotation(data, known, unknown, norm, n_parts)
        infos.append(RotationInfo(r, known, unknown, norm))
        for name, trainer in trainers.items():
            model = trainer(train, norm)
            for split, idx in (("Known", known), ("Unknown", unknown)):
                est = model.predict_raw(data.counters[idx])
                cells[(name, split, r)] = ErrorStats.from_predictions(est, data.power[idx])
    return EvalReport(tuple(trainers), n_parts, cells, tuple(infos))


def _fmt(x: float) -> str:
    return repr(float(x))


def report_rows(report: EvalReport) -> list[list[str]]:
    rows = []
    for model in report.models:
        for split in SPLITS:
            for r in report.rotation_ids:
                c = report.stats(model, split, r)
                rows.append([model, split, str(r), _fmt(c.mean_error)]
                            + [_fmt(b) for b in c.cdf_buckets])
            mean, buckets = report.aggregate(model, split)
            rows.append([model, split, "agg", _fmt(mean)] + [_fmt(b) for b in buckets])
    return rows


def format_report_csv(report: EvalReport) -> str:
    out = io.StringIO()
    out.write(REPORT_HEADER + "\n")
    for row in report_rows(report):
        out.write(",".join(row) + "\n")
    return out.getvalue()


def format_ranking(report: EvalReport) -> str:
    """Plain-text ranking of models by aggregate mean error, per split."""
    lines = [f"# aggregate = mean over {len(report.rotations)} rotation(s) "
             f"of {report.n_parts}-part Known/Unknown splits"]
    for split in SPLITS:
        lines.append(f"{split}:")
        ranked = sorted(report.models, key=lambda m: (report.mean_error(m, split), m))
        for k, model in enumerate(ranked, start=1):
            mean, buckets = report.aggregate(model, split)
            cells = [report.stats(model, split, r) for r in report.rotation_ids]
            flags = []
            floored = sum(c.n_floored for c in cells)
            negative = sum(c.n_negative for c in cells)
            if floored:
                flags.append(f"{floored} zero-power vectors floored")
            if negative:
                flags.append(f"{negative} negative predictions")
            note = f"  [{'; '.join(flags)}]" if flags else ""
            lines.append(f"  {k}. {model:<8} mean_error={mean:.6f} "
                         f"p_lt_10={buckets[1]:.3f}{note}")
    return "\n".join(lines) + "\n"


def compare_report(report: EvalReport, sink, ranking_sink=None) -> None:
    """Write the report CSV to ``sink`` and, if given, the ranking to ``ranking_sink``."""
    _write(sink, format_report_csv(report))
    if ranking_sink is not None:
        _write(ranking_sink, format_ranking(report))


def _write(sink, text: str) -> None:
    if isinstance(sink, io.TextIOBase):
        sink.write(text)
    else:
        sink.write(text.encode("utf-8"))
