"""Counter trace CSV I/O and the synthetic trace generator.

Trace format (UTF-8, LF line endings, no quoting, no blank lines)::

    power,<counter_1>,...,<counter_n>
    3.5,1000,...

Numbers are written in shortest round-trip form; integral values are written
without a fractional part, so ``write_trace(read_trace(x)) == x`` for any file
already in that canonical form.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import IO, Sequence, Union

import numpy as np

from .core import CounterSchema, Dataset, fit_normalization
from .errors import SchemaError, TraceFormatError

POWER_COLUMN = "power"
TRUTH_HEADER = "index,noise_free_power"
# above this, integral floats are no longer exactly representable integers
_EXACT_INT = 2.0 ** 53

Source = Union[IO[bytes], IO[str]]


def format_number(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot write non-finite value {x!r}")
    if x == int(x) and abs(x) < _EXACT_INT:
        return str(int(x))
    return repr(x)


def _read_text(source) -> str:
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data


def read_trace(source: Source) -> Dataset:
    """Parse a trace CSV stream into a raw :class:`Dataset`."""
    text = _read_text(source)
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].strip():
        raise TraceFormatError("missing header", row=1)
    header = lines[0].rstrip("\r").split(",")
    if header[0] != POWER_COLUMN:
        raise TraceFormatError(
            f"header must start with {POWER_COLUMN!r}, got {header[0]!r}", row=1)
    try:
        schema = CounterSchema(tuple(header[1:]))
    except SchemaError as exc:
        raise TraceFormatError(f"bad header: {exc}", row=1) from None

    width = schema.n + 1
    values = np.empty((len(lines) - 1, width), dtype=np.float64)
    for r, line in enumerate(lines[1:], start=2):
        cells = line.rstrip("\r").split(",")
        if len(cells) != width:
            raise TraceFormatError(
                f"expected {width} cells, found {len(cells)}", row=r)
        for c, cell in enumerate(cells):
            try:
                v = float(cell)
            except ValueError:
                raise TraceFormatError(f"non-numeric cell {cell!r}", row=r, column=c + 1) from None
            if not math.isfinite(v):
                raise TraceFormatError(f"non-finite cell {cell!r}", row=r, column=c + 1)
            if v < 0:
                what = "power" if c == 0 else f"counter {header[c]}"
                raise TraceFormatError(f"negative {what} value {cell}", row=r, column=c + 1)
            values[r - 2, c] = v
    return Dataset(schema, values[:, 0], values[:, 1:])


def write_trace(data: Dataset, sink: Source) -> None:
    """Emit ``data`` in the trace CSV format."""
    if len(data) == 0:
        raise ValueError("refusing to write an empty trace")
    out = io.StringIO()
    out.write(",".join((POWER_COLUMN,) + data.schema.names) + "\n")
    for p, row in zip(data.power, data.counters):
        out.write(format_number(p))
        for v in row:
            out.write(",")
            out.write(format_number(v))
        out.write("\n")
    _write_text(sink, out.getvalue())


def _write_text(sink, text: str) -> None:
    if isinstance(sink, io.TextIOBase):
        sink.write(text)
    else:
        sink.write(text.encode("utf-8"))


def read_trace_file(path) -> Dataset:
    with open(path, "rb") as fh:
        return read_trace(fh)


def write_trace_file(data: Dataset, path) -> None:
    with open(path, "wb") as fh:
        write_trace(data, fh)


# -- synthetic traces ---------------------------------------------------------

COUNTER_MAX = 10**6


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic trace with a known power function.

    The first ``n_relevant`` counters drive power::

        P = sum_j c_j * e_j + nonlinear_weight * sum_{a<b} e_a * e_b + noise

    where ``e`` is the min-max normalized counter (fitted over the generated
    trace) and the pairwise sum runs over relevant counters only.  The other
    counters are independent noise.
    """

    n_counters: int
    n_relevant: int
    linear_coeffs: tuple[float, ...]
    nonlinear_weight: float = 0.0
    noise_std: float = 0.0
    n_vectors: int = 1000
    rng_seed: int = 0
    counter_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "linear_coeffs", tuple(float(c) for c in self.linear_coeffs))
        object.__setattr__(self, "counter_names", tuple(self.counter_names))
        if self.n_counters < 1:
            raise ValueError("n_counters must be at least 1")
        if not 0 <= self.n_relevant <= self.n_counters:
            raise ValueError(
                f"n_relevant={self.n_relevant} must lie in [0, n_counters={self.n_counters}]")
        if len(self.linear_coeffs) != self.n_relevant:
            raise ValueError(
                f"need {self.n_relevant} linear coefficients, got {len(self.linear_coeffs)}")
        if self.nonlinear_weight < 0 or self.noise_std < 0:
            raise ValueError("nonlinear_weight and noise_std must be non-negative")
        if self.n_vectors < 1:
            raise ValueError("n_vectors must be at least 1")
        if self.counter_names and len(self.counter_names) != self.n_counters:
            raise ValueError("counter_names must name every counter")

    @property
    def names(self) -> tuple[str, ...]:
        if self.counter_names:
            return self.counter_names
        width = max(2, len(str(self.n_counters - 1)))
        return tuple(f"ctr_{i:0{width}d}" for i in range(self.n_counters))


@dataclass(frozen=True)
class GroundTruth:
    relevant: tuple[str, ...]
    noise_free_power: np.ndarray = field(repr=False)
    linear_coeffs: tuple[float, ...] = ()
    nonlinear_weight: float = 0.0

    def __eq__(self, other):
        if not isinstance(other, GroundTruth):
            return NotImplemented
        return (self.relevant == other.relevant
                and self.linear_coeffs == other.linear_coeffs
                and self.nonlinear_weight == other.nonlinear_weight
                and np.array_equal(self.noise_free_power, other.noise_free_power))


def power_function(normalized: np.ndarray, linear_coeffs: Sequence[float],
                   nonlinear_weight: float) -> np.ndarray:
    """Noise-free power for normalized relevant counters (columns in order)."""
    e = np.atleast_2d(np.asarray(normalized, dtype=np.float64))
    c = np.asarray(linear_coeffs, dtype=np.float64)
    p = e[:, :len(c)] @ c
    if nonlinear_weight:
        pairs = np.zeros(e.shape[0])
        for a, b in combinations(range(len(c)), 2):
            pairs += e[:, a] * e[:, b]
        p = p + nonlinear_weight * pairs
    return p


def generate_synthetic(spec: SyntheticSpec) -> tuple[Dataset, GroundTruth]:
    rng = np.random.default_rng(spec.rng_seed)
    names = spec.names
    schema = CounterSchema(names)
    # integral counts keep column rescaling exact in floating point
    counters = rng.integers(0, COUNTER_MAX, size=(spec.n_vectors, spec.n_counters),
                            endpoint=True).astype(np.float64)
    raw = Dataset(schema, np.zeros(spec.n_vectors), counters)
    e = fit_normalization(raw).apply(counters)
    clean = power_function(e[:, :spec.n_relevant], spec.linear_coeffs, spec.nonlinear_weight)
    clean = np.maximum(clean, 0.0)

    power = clean.copy()
    if spec.noise_std > 0:
        noise = rng.normal(0.0, spec.noise_std, size=spec.n_vectors)
        # truncate: redraw the noise wherever it would push power below zero
        bad = power + noise < 0
        while bad.any():
            noise[bad] = rng.normal(0.0, spec.noise_std, size=int(bad.sum()))
            bad = power + noise < 0
        power = power + noise
    truth = GroundTruth(names[:spec.n_relevant], clean, spec.linear_coeffs,
                        spec.nonlinear_weight)
    return Dataset(schema, power, counters), truth


def write_truth(truth: GroundTruth, sink: Source) -> None:
    """Ground-truth sidecar: a ``#``-prefixed JSON manifest line, then CSV."""
    manifest = {"relevant": list(truth.relevant),
                "linear_coeffs": list(truth.linear_coeffs),
                "nonlinear_weight": truth.nonlinear_weight}
    out = io.StringIO()
    out.write("# " + json.dumps(manifest, separators=(",", ":")) + "\n")
    out.write(TRUTH_HEADER + "\n")
    for i, p in enumerate(truth.noise_free_power):
        out.write(f"{i},{format_number(p)}\n")
    _write_text(sink, out.getvalue())


def read_truth(source: Source) -> GroundTruth:
    lines = _read_text(source).splitlines()
    if len(lines) < 2 or not lines[0].startswith("# ") or lines[1] != TRUTH_HEADER:
        raise TraceFormatError("not a ground-truth file", row=1)
    manifest = json.loads(lines[0][2:])
    power = np.array([float(line.split(",")[1]) for line in lines[2:]])
    return GroundTruth(tuple(manifest["relevant"]), power,
                       tuple(manifest.get("linear_coeffs", ())),
                       float(manifest.get("nonlinear_weight", 0.0)))
