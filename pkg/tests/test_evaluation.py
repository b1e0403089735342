import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from counterpower import (CounterSchema, Dataset, ErrorStats, SplitPlan, SyntheticSpec,
                          compare_report, compute_error, evaluate, fit_normalization,
                          generate_synthetic)
from counterpower.evaluation import (REPORT_HEADER, ProtocolError, _check_rotation,
                                     format_ranking, format_report_csv)


class TableModel:
    """Looks predictions up by raw counter row."""

    def __init__(self, data, values):
        self.table = {row.tobytes(): v for row, v in zip(data.counters, values)}

    def predict_raw(self, counters):
        return np.array([self.table[row.tobytes()] for row in np.atleast_2d(counters)])


@pytest.fixture(scope="module")
def linear_trace():
    return generate_synthetic(SyntheticSpec(4, 3, (3.0, 2.0, 1.0), 0.0, 0.0, 400, 8))


def test_compute_error_examples():
    assert compute_error(11.0, 10.0) == pytest.approx(0.1)
    assert compute_error(10.0, 10.0) == 0.0
    assert compute_error(5.0, 0.0) == 5.0 / 1e-6


def test_compute_error_negative_measured():
    with pytest.raises(ValueError):
        compute_error(1.0, -1.0)


def test_floored_vectors_counted():
    s = ErrorStats.from_predictions([5.0, 1.0, -0.5], [0.0, 1.0, 2.0])
    assert s.n_floored == 1 and s.n_negative == 1
    assert s.errors[0] == 5.0 / 1e-6


@given(arrays(np.float64, st.integers(1, 50), elements=st.floats(-10, 100)),
       st.data())
def test_error_stats_invariants(est, data):
    meas = data.draw(arrays(np.float64, len(est), elements=st.floats(0, 100)))
    s = ErrorStats.from_predictions(est, meas)
    assert all(0.0 <= b <= 1.0 for b in s.cdf_buckets)
    assert list(s.cdf_buckets) == sorted(s.cdf_buckets)
    assert s.mean_error == pytest.approx(float(np.mean(s.errors)))
    manual = [compute_error(e, m) for e, m in zip(est, meas)]
    np.testing.assert_allclose(s.errors, manual, rtol=1e-15)


def test_split_arithmetic_eight_vectors():
    known, unknown = SplitPlan(4, 1).known_unknown(8)
    assert len(known) == 6 and len(unknown) == 2
    assert unknown.tolist() == [2, 3]


@pytest.mark.parametrize("n", [8, 10, 13])
def test_parts_partition_the_trace(n):
    for r in range(4):
        known, unknown = SplitPlan(4, r).known_unknown(n)
        assert sorted(known.tolist() + unknown.tolist()) == list(range(n))


def test_split_plan_validation():
    with pytest.raises(ValueError):
        SplitPlan(4, 4)
    with pytest.raises(ValueError):
        SplitPlan(4, 0).parts(3)


def test_perfect_model(linear_trace):
    data, truth = linear_trace
    oracle = TableModel(data, truth.noise_free_power)
    report = evaluate({"oracle": lambda train, norm: oracle}, data)
    for split in ("Known", "Unknown"):
        mean, buckets = report.aggregate("oracle", split)
        assert mean == 0.0
        assert buckets == (1.0,) * 6


def test_lrpm_exact_on_linear_data(linear_trace):
    data, _ = linear_trace
    report = evaluate(["lrpm"], data)
    assert report.mean_error("lrpm", "Unknown") < 1e-6


def test_known_scored_on_training_vectors(linear_trace):
    data, _ = linear_trace
    seen = []

    def trainer(train, norm):
        seen.append((train, norm))
        return TableModel(data, data.power)

    report = evaluate({"m": trainer}, data)
    assert len(seen) == 4
    for (train, norm), info in zip(seen, report.rotations):
        assert train == data.subset(info.known)
        assert norm == fit_normalization(train)
        assert report.stats("m", "Known", info.rotation).n == len(info.known)
        assert report.stats("m", "Unknown", info.rotation).n == len(info.unknown)


def test_protocol_checks(linear_trace):
    data, _ = linear_trace
    known, unknown = SplitPlan(4, 0).known_unknown(len(data))
    good = fit_normalization(data.subset(known))
    _check_rotation(data, known, unknown, good, 4)
    leaked = fit_normalization(data)
    if leaked != good:
        with pytest.raises(ProtocolError):
            _check_rotation(data, known, unknown, leaked, 4)
    with pytest.raises(ProtocolError):
        _check_rotation(data, np.append(known, unknown[0]), unknown, good, 4)
    with pytest.raises(ProtocolError):
        _check_rotation(data, known[:-1], unknown, good, 4)


def test_rotation_symmetry(linear_trace):
    data, truth = linear_trace
    noisy = data.with_power(data.power * (1 + 0.01 * np.sin(np.arange(len(data)))))
    a = evaluate(["lrpm"], noisy)
    b = evaluate(["lrpm"], noisy, rotations=[2, 0, 3, 1])
    for r in range(4):
        assert a.stats("lrpm", "Unknown", r) == b.stats("lrpm", "Unknown", r)
    for split in ("Known", "Unknown"):
        ma, ba = a.aggregate("lrpm", split)
        mb, bb = b.aggregate("lrpm", split)
        assert ma == pytest.approx(mb, rel=1e-12)
        np.testing.assert_allclose(ba, bb, rtol=1e-12)


def test_report_structure(linear_trace):
    data, _ = linear_trace
    report = evaluate(["lrpm", "svmpm"], data, hp={"svmpm": {"C": 10.0}})
    text = format_report_csv(report)
    lines = text.splitlines()
    assert lines[0] == REPORT_HEADER
    rows = [line.split(",") for line in lines[1:]]
    assert len(rows) == 2 * 2 * 5
    agg = [r for r in rows if r[2] == "agg"]
    assert [(r[0], r[1]) for r in agg] == [("lrpm", "Known"), ("lrpm", "Unknown"),
                                          ("svmpm", "Known"), ("svmpm", "Unknown")]
    for r in rows:
        buckets = [float(v) for v in r[4:]]
        assert buckets == sorted(buckets)
    sink, ranking = io.StringIO(), io.StringIO()
    compare_report(report, sink, ranking)
    assert sink.getvalue() == text
    assert "Known:" in ranking.getvalue() and "Unknown:" in ranking.getvalue()


def test_ranking_flags_floored_and_negative():
    schema = CounterSchema(("a",))
    data = Dataset(schema, [0.0, 1.0, 2.0, 3.0, 0.0, 1.0, 2.0, 3.0], np.arange(8.0)[:, None])
    model = TableModel(data, [-1.0, 1, 2, 3, -1.0, 1, 2, 3])
    report = evaluate({"m": lambda train, norm: model}, data)
    text = format_ranking(report)
    assert "zero-power vectors floored" in text
    assert "negative predictions" in text


def test_bad_inputs(linear_trace):
    data, _ = linear_trace
    with pytest.raises(ValueError):
        evaluate(["forest"], data)
    with pytest.raises(ValueError):
        evaluate([], data)
    with pytest.raises(ValueError):
        evaluate(["lrpm"], data.normalized(fit_normalization(data)))
