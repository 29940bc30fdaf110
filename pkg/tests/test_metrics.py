import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from meteonn.metrics import MetricError, mae, mape, metric_report, rmse, theils_u


def test_rmse_examples():
    assert rmse([1, 2, 3], [1, 2, 3]) == 0
    assert rmse([0, 0], [1, 1]) == 1
    assert abs(rmse([1, 2], [1, 0]) - np.sqrt(2)) < 1e-12


def test_mape_examples():
    assert mape([2], [1]) == 50
    assert mape([3, 4], [3, 4]) == 0
    expected = 100 * (1 / 283.15 + 1 / 263.15) / 2
    assert abs(mape([10, -10], [9, -9], offset=273.15) - expected) < 1e-12
    assert abs(expected - 0.366591) < 1e-6


def test_mape_zero_denominator_lists_indices():
    with pytest.raises(MetricError, match=r"\[1, 3\]"):
        mape([1, 0, 2, 0], [1, 1, 1, 1])


def test_mae_examples():
    assert mae([5, 6], [5, 6]) == 0
    assert mae([1, -1], [0, 0]) == 1
    assert mae([3], [1]) == 2


def test_theils_u_examples():
    assert theils_u([1, 2, 3], [1, 2, 3]) == 0
    assert theils_u([1], [0]) == 1
    assert abs(theils_u([1, 2], [2, 1]) - 1 / (2 * np.sqrt(2.5))) < 1e-12
    with pytest.raises(MetricError):
        theils_u([0, 0], [0, 0])


def test_input_validation():
    with pytest.raises(MetricError):
        rmse([], [])
    with pytest.raises(MetricError):
        mae([1, 2], [1])
    with pytest.raises(MetricError):
        rmse([np.nan], [1])


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=200)
@given(arrays(np.float64, st.integers(1, 30), elements=finite), st.data())
def test_rmse_dominates_mae(y, data):
    p = data.draw(arrays(np.float64, y.shape, elements=finite))
    assert rmse(y, p) >= mae(y, p) - 1e-12 * max(1.0, mae(y, p))


@settings(max_examples=100)
@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(1, 50)), st.floats(0, 300))
def test_zero_iff_equal(y, offset):
    r = metric_report(y, y, offset)
    assert r.rmse == r.mape == r.mae == r.theils_u == 0
    q = y.copy()
    q[0] += 1.0
    r = metric_report(y, q, offset)
    assert min(r.rmse, r.mape, r.mae, r.theils_u) > 0


def test_rmse_offset_invariant_and_ratio_continuity(rng):
    y = rng.uniform(-10, 30, 50)
    p = y + rng.normal(0, 2, 50)
    assert metric_report(y, p, 0).rmse == metric_report(y, p, 273.15).rmse
    for f in (mape, theils_u):
        assert abs(f(y + 0, p, 273.15) - f(y, p, 273.15 + 1e-9)) < 1e-8


def test_theils_u_bounded(rng):
    for _ in range(200):
        y = rng.uniform(0, 100, 20)
        p = rng.uniform(0, 100, 20)
        assert 0 <= theils_u(y, p) <= 1
