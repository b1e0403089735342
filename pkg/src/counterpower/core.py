"""Domain types: counter schemas, sampled vectors, datasets and min-max normalization.

A :class:`Dataset` is array-backed (one power column plus an ``(N, n)`` counter
matrix) so that the numeric code downstream never has to loop over Python
objects.  :class:`CounterVector` is the per-interval view of one row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import SchemaError


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CounterSchema:
    """Ordered, unique counter identifiers, e.g. ``("PAPI_TOT_CYC", "PAPI_TOT_INS")``."""

    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if not names:
            raise SchemaError("a counter schema needs at least one counter")
        for name in names:
            if not isinstance(name, str) or not name:
                raise SchemaError(f"invalid counter name {name!r}")
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate counter names: {', '.join(dup)}")

    @property
    def n(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown counter {name!r}") from None

    def project(self, names: Sequence[str]) -> "CounterSchema":
        for name in names:
            self.index(name)
        return CounterSchema(tuple(names))


@dataclass(frozen=True)
class CounterVector:
    """One sampling interval: dynamic power (W) and the raw counter deltas."""

    power_dynamic: float
    counters: tuple[float, ...]
    interval_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "counters", tuple(float(c) for c in self.counters))
        if not self.power_dynamic >= 0:
            raise ValueError(f"power must be non-negative, got {self.power_dynamic}")

    @property
    def n(self) -> int:
        return len(self.counters)


@dataclass(frozen=True)
class NormalizationParams:
    """Per-counter extrema used by the min-max map ``(e - min) / (max - min)``."""

    names: tuple[str, ...]
    mins: np.ndarray = field(repr=False)
    maxs: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        mins, maxs = _frozen(self.mins), _frozen(self.maxs)
        if mins.shape != (len(self.names),) or maxs.shape != mins.shape:
            raise SchemaError("normalization needs one (min, max) pair per counter")
        if np.any(mins > maxs):
            raise ValueError("normalization min exceeds max")
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    def __eq__(self, other):
        if not isinstance(other, NormalizationParams):
            return NotImplemented
        return (self.names == other.names
                and np.array_equal(self.mins, other.mins)
                and np.array_equal(self.maxs, other.maxs))

    def __hash__(self):
        return hash((self.names, self.mins.tobytes(), self.maxs.tobytes()))

    def project(self, names: Sequence[str]) -> "NormalizationParams":
        idx = [self.names.index(n) for n in names]
        return NormalizationParams(tuple(names), self.mins[idx], self.maxs[idx])

    def apply(self, counters: np.ndarray) -> np.ndarray:
        """Normalize a counter matrix (or a single row).

        Constant counters (max == min) map to 0.  Values outside the fitted
        range are not clamped.
        """
        x = np.asarray(counters, dtype=np.float64)
        if x.shape[-1] != len(self.names):
            raise SchemaError(
                f"expected {len(self.names)} counters, got {x.shape[-1]}")
        span = self.maxs - self.mins
        degenerate = span == 0
        out = (x - self.mins) / np.where(degenerate, 1.0, span)
        if degenerate.any():
            out = np.where(degenerate, 0.0, out)
        return out


class Dataset:
    """Ordered vectors sharing a schema, stored column-wise.

    ``power`` has shape ``(N,)`` and ``counters`` shape ``(N, n)``; both are
    read-only.  ``norm`` records the normalization already applied to
    ``counters`` (``None`` for raw counts).
    """

    __slots__ = ("schema", "power", "counters", "norm")

    def __init__(self, schema: CounterSchema, power, counters,
                 norm: Optional[NormalizationParams] = None):
        power = _frozen(power).reshape(-1)
        counters = _frozen(counters)
        if counters.ndim == 1 and schema.n == 1:
            counters = _frozen(counters.reshape(-1, 1))
        if counters.ndim != 2 or counters.shape[1] != schema.n:
            raise SchemaError(
                f"counter matrix shape {counters.shape} does not match "
                f"schema arity {schema.n}")
        if counters.shape[0] != power.shape[0]:
            raise SchemaError("power and counter columns differ in length")
        if np.any(power < 0) or np.isnan(power).any():
            raise ValueError("power must be non-negative")
        if norm is not None and norm.names != schema.names:
            raise SchemaError("normalization parameters do not match schema")
        self.schema = schema
        self.power = power
        self.counters = counters
        self.norm = norm

    @classmethod
    def from_vectors(cls, schema: CounterSchema, vectors: Sequence[CounterVector],
                     norm: Optional[NormalizationParams] = None) -> "Dataset":
        for v in vectors:
            if v.n != schema.n:
                raise SchemaError(
                    f"vector {v.interval_index} has {v.n} counters, schema has {schema.n}")
        power = [v.power_dynamic for v in vectors]
        counters = np.array([v.counters for v in vectors], dtype=np.float64)
        return cls(schema, power, counters.reshape(len(vectors), schema.n), norm)

    def __len__(self) -> int:
        return self.power.shape[0]

    def __getitem__(self, i: int) -> CounterVector:
        i = range(len(self))[i]
        return CounterVector(float(self.power[i]), tuple(self.counters[i]), i)

    def __iter__(self) -> Iterator[CounterVector]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.schema == other.schema and self.norm == other.norm
                and np.array_equal(self.power, other.power)
                and np.array_equal(self.counters, other.counters))

    def __repr__(self):
        kind = "normalized" if self.norm is not None else "raw"
        return f"Dataset({len(self)} vectors, {self.schema.n} counters, {kind})"

    @property
    def vectors(self) -> list[CounterVector]:
        return list(self)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(self.schema, self.power[idx], self.counters[idx], self.norm)

    def project(self, names: Sequence[str]) -> "Dataset":
        """Keep only the named counters, in the given order."""
        schema = self.schema.project(names)
        idx = [self.schema.index(n) for n in names]
        norm = self.norm.project(names) if self.norm is not None else None
        return Dataset(schema, self.power, self.counters[:, idx], norm)

    def with_power(self, power) -> "Dataset":
        return Dataset(self.schema, power, self.counters, self.norm)

    def normalized(self, params: NormalizationParams) -> "Dataset":
        if self.norm is not None:
            raise ValueError("dataset is already normalized")
        if params.names != self.schema.names:
            raise SchemaError("normalization parameters do not match schema")
        return Dataset(self.schema, self.power, params.apply(self.counters), params)


def fit_normalization(data: Dataset) -> NormalizationParams:
    """Per-counter extrema over ``data``.  Power is left out on purpose."""
    if len(data) == 0:
        raise ValueError("cannot fit normalization on an empty dataset")
    return NormalizationParams(data.schema.names,
                               data.counters.min(axis=0), data.counters.max(axis=0))


def normalize(v: CounterVector, p: NormalizationParams) -> CounterVector:
    if v.n != len(p.names):
        raise SchemaError(f"vector has {v.n} counters, normalization has {len(p.names)}")
    return CounterVector(v.power_dynamic, tuple(p.apply(np.array(v.counters))),
                         v.interval_index)
