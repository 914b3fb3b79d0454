import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kpiscan.errors import EmptySeries, NonFinite, TooShort
from kpiscan.series import (
    Interval,
    KpiSeries,
    LabeledExample,
    normalize_series,
    prepare_example,
    prepare_matrix,
    resample_to_length,
)
from kpiscan.labels import ClassLabel


def test_normalize_affine_endpoints():
    assert np.array_equal(normalize_series([2, 4, 6]), [0.0, 0.5, 1.0])


def test_normalize_flat_convention():
    assert np.array_equal(normalize_series([7, 7, 7]), [0.5, 0.5, 0.5])


def test_normalize_minmax_anchoring():
    assert np.array_equal(normalize_series([0, 10, 5, 10]), [0.0, 1.0, 0.5, 1.0])


def test_normalize_errors():
    with pytest.raises(EmptySeries):
        normalize_series([])
    with pytest.raises(NonFinite):
        normalize_series([1.0, np.nan])
    with pytest.raises(NonFinite):
        normalize_series([1.0, np.inf])


def test_resample_identity_when_length_matches():
    rng = np.random.default_rng(0)
    values = rng.random(96)
    assert np.array_equal(resample_to_length(values, 96), values)


def test_resample_linear_ramp():
    assert np.allclose(resample_to_length([0, 1, 2, 3], 7), [0, 0.5, 1, 1.5, 2, 2.5, 3])


def test_resample_endpoints_preserved():
    out = resample_to_length([1, 3, 3, 1], 4)
    assert out[0] == 1 and out[-1] == 1
    rng = np.random.default_rng(1)
    values = rng.random(37)
    out = resample_to_length(values, 12)
    assert out[0] == values[0] and out[-1] == values[-1]


def test_resample_too_short():
    with pytest.raises(TooShort):
        resample_to_length([1, 2, 3], 8)
    with pytest.raises(TooShort):
        resample_to_length([1, 2, 3, 4], 3)


def test_prepare_example_composition():
    series = KpiSeries("c1", [2, 4, 6, 8])
    assert np.allclose(prepare_example(series, 4), [0, 1 / 3, 2 / 3, 1])


def test_prepare_example_flat():
    series = KpiSeries("c1", [5.0] * 10)
    assert np.array_equal(prepare_example(series, 8), np.full(8, 0.5))


def test_prepare_example_ramp_monotone():
    # independent oracle: direct interpolation of a ramp stays a ramp, so
    # the prepared vector must be strictly increasing from 0 to 1
    series = KpiSeries("ramp", np.arange(200, dtype=float))
    out = prepare_example(series, 100)
    assert out[0] == 0.0 and out[-1] == 1.0
    assert np.all(np.diff(out) > 0)
    oracle = np.interp(np.linspace(0, 199, 100), np.arange(200), np.arange(200.0))
    oracle = (oracle - oracle.min()) / (oracle.max() - oracle.min())
    assert np.allclose(out, oracle, atol=1e-12)


def test_prepare_matrix_matches_single_series_path():
    # the bulk scanner depends on row-wise ops being bit-identical to the
    # per-series functions
    rng = np.random.default_rng(2)
    raw = rng.random((50, 37)) * 500
    bulk = prepare_matrix(raw, 16)
    for i in range(raw.shape[0]):
        single = prepare_example(KpiSeries(f"c{i}", raw[i]), 16)
        assert np.array_equal(bulk[i], single)


def test_kpi_series_validation():
    with pytest.raises(EmptySeries):
        KpiSeries("x", [])
    with pytest.raises(NonFinite):
        KpiSeries("x", [1.0, np.nan])
    with pytest.raises(ValueError):
        KpiSeries("x", [1.0, -2.0])
    series = KpiSeries("x", [1, 2, 3], Interval.WEEKLY)
    assert series.interval is Interval.WEEKLY
    assert len(series) == 3


def test_labeled_example_validation():
    with pytest.raises(ValueError):
        LabeledExample(np.array([0.5, 1.5]), ClassLabel.Normal, "bad")
    ex = LabeledExample(np.array([0.0, 1.0, 0.25]), 3, "ok")
    assert ex.label is ClassLabel.SuddenlyDecreasing


positive_series = st.lists(
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False),
    min_size=4,
    max_size=120,
)


@given(positive_series, st.floats(min_value=0.01, max_value=1e3), st.floats(min_value=0.0, max_value=1e4))
@settings(max_examples=80, deadline=None)
def test_normalize_scale_shift_invariant(values, scale, shift):
    arr = np.asarray(values)
    base = normalize_series(arr)
    transformed = normalize_series(arr * scale + shift)
    assert np.allclose(base, transformed, atol=1e-6)


@given(positive_series)
@settings(max_examples=80, deadline=None)
def test_normalize_bounds(values):
    out = normalize_series(values)
    assert out.min() >= 0.0 and out.max() <= 1.0
    arr = np.asarray(values)
    if arr.max() > arr.min():
        assert out.min() == 0.0 and out.max() == 1.0


@given(positive_series, st.integers(min_value=4, max_value=64))
@settings(max_examples=80, deadline=None)
def test_prepare_never_leaves_unit_interval(values, length):
    series = KpiSeries("h", values)
    out = prepare_example(series, length)
    assert out.shape == (length,)
    assert out.min() >= 0.0 and out.max() <= 1.0
