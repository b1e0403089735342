"""Versioned plain-text model files.

One ``key = value`` pair per line; vectors are comma-separated, matrices use
one key per row (``W1.0``, ``W1.1``, ...).  Floats are written in shortest
round-trip form so a reloaded model predicts bit-identically.  Example::

    # counterpower model
    format = 1
    kind = lrpm
    counters = PAPI_TOT_CYC,PAPI_TOT_INS
    norm.min = 0,12
    norm.max = 1000,900
    linear.intercept = 0.25
    linear.coeffs = 2,0.5
    linear.ridge = 0

SVR sections hold ``kernel gamma C epsilon bias dual_coef`` and one ``sv.<k>``
line per support vector; MLP sections hold ``hidden W1.<k> b1 w2 b2``.  A
two-stage model has a ``base.`` linear section and a ``diff.`` SVR section.
"""

from __future__ import annotations

import io
from typing import Iterable

import numpy as np

from .core import CounterSchema, NormalizationParams
from .errors import ModelFormatError
from .fitting import FittedModel, PowerModel, model_kind
from .models import LinearModel, MlpModel, SvrModel
from .tspm import TwoStageModel

FORMAT_VERSION = 1
MAGIC = "# counterpower model"


def _num(x) -> str:
    x = float(x)
    if x == int(x) and abs(x) < 2.0 ** 53:
        return str(int(x))
    return repr(x)


def _vec(a: Iterable) -> str:
    return ",".join(_num(v) for v in a)


def _linear_lines(prefix, m: LinearModel):
    yield f"{prefix}intercept", _num(m.intercept)
    yield f"{prefix}coeffs", _vec(m.coeffs)
    yield f"{prefix}ridge", _num(m.ridge)


def _svr_lines(prefix, m: SvrModel):
    yield f"{prefix}kernel", m.kernel
    yield f"{prefix}gamma", _num(m.gamma)
    yield f"{prefix}C", _num(m.C)
    yield f"{prefix}epsilon", _num(m.epsilon)
    yield f"{prefix}bias", _num(m.bias)
    yield f"{prefix}n_support", str(m.n_support)
    yield f"{prefix}dual_coef", _vec(m.dual_coef)
    for k, row in enumerate(m.support_vectors):
        yield f"{prefix}sv.{k}", _vec(row)


def _mlp_lines(prefix, m: MlpModel):
    yield f"{prefix}hidden", str(m.hidden)
    for k, row in enumerate(m.W1):
        yield f"{prefix}W1.{k}", _vec(row)
    yield f"{prefix}b1", _vec(m.b1)
    yield f"{prefix}w2", _vec(m.w2)
    yield f"{prefix}b2", _num(m.b2)


def dumps(model: PowerModel) -> str:
    kind = model_kind(model)
    lines = [("format", str(FORMAT_VERSION)), ("kind", kind),
             ("counters", ",".join(model.schema.names)),
             ("norm.min", _vec(model.norm.mins)), ("norm.max", _vec(model.norm.maxs))]
    if isinstance(model, TwoStageModel):
        lines += _linear_lines("base.", model.base)
        lines += _svr_lines("diff.", model.diff)
    elif kind == "lrpm":
        lines += _linear_lines("linear.", model.regressor)
    elif kind == "svmpm":
        lines += _svr_lines("svr.", model.regressor)
    elif kind == "nnpm":
        lines += _mlp_lines("mlp.", model.regressor)
    else:
        raise ModelFormatError(f"cannot serialize model kind {kind!r}")
    out = io.StringIO()
    out.write(MAGIC + "\n")
    for key, value in lines:
        out.write(f"{key} = {value}\n")
    return out.getvalue()


class _Fields:
    def __init__(self, text: str):
        lines = text.splitlines()
        if not lines or lines[0] != MAGIC:
            raise ModelFormatError("not a counterpower model file")
        self.d = {}
        for n, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            key, sep, value = line.partition(" = ")
            if not sep:
                raise ModelFormatError(f"line {n}: expected 'key = value'")
            self.d[key] = value

    def str(self, key):
        try:
            return self.d[key]
        except KeyError:
            raise ModelFormatError(f"missing field {key!r}") from None

    def float(self, key):
        return float(self.str(key))

    def int(self, key):
        return int(self.str(key))

    def vec(self, key):
        s = self.str(key)
        return np.array([float(v) for v in s.split(",")]) if s else np.zeros(0)

    def rows(self, prefix, count):
        return np.array([self.vec(f"{prefix}{k}") for k in range(count)])


def _load_linear(f: _Fields, prefix) -> LinearModel:
    return LinearModel(f.vec(f"{prefix}coeffs"), f.float(f"{prefix}intercept"),
                       f.float(f"{prefix}ridge"))


def _load_svr(f: _Fields, prefix, n_features) -> SvrModel:
    n_sv = f.int(f"{prefix}n_support")
    sv = f.rows(f"{prefix}sv.", n_sv).reshape(n_sv, n_features)
    return SvrModel(sv, f.vec(f"{prefix}dual_coef"), f.float(f"{prefix}bias"),
                    f.str(f"{prefix}kernel"), f.float(f"{prefix}gamma"),
                    f.float(f"{prefix}C"), f.float(f"{prefix}epsilon"), n_features)


def _load_mlp(f: _Fields, prefix) -> MlpModel:
    h = f.int(f"{prefix}hidden")
    return MlpModel(f.rows(f"{prefix}W1.", h), f.vec(f"{prefix}b1"),
                    f.vec(f"{prefix}w2"), f.float(f"{prefix}b2"))


def loads(text: str) -> PowerModel:
    f = _Fields(text)
    version = f.int("format")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    schema = CounterSchema(tuple(f.str("counters").split(",")))
    norm = NormalizationParams(schema.names, f.vec("norm.min"), f.vec("norm.max"))
    kind = f.str("kind")
    if kind == "tspm":
        return TwoStageModel(_load_linear(f, "base."), _load_svr(f, "diff.", schema.n),
                             norm, schema)
    if kind == "lrpm":
        reg = _load_linear(f, "linear.")
    elif kind == "svmpm":
        reg = _load_svr(f, "svr.", schema.n)
    elif kind == "nnpm":
        reg = _load_mlp(f, "mlp.")
    else:
        raise ModelFormatError(f"unknown model kind {kind!r}")
    return FittedModel(kind, reg, norm, schema)


def save_model(model: PowerModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(model))


def load_model(path) -> PowerModel:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
