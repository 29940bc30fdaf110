import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from meteonn.dataset import (
    DataError, NormalizationParams, RawSeries, Season, SplitConfig, WindowSpec, build_windows,
    chronological_split, denormalize, generate_synthetic, load_csv, minmax_normalize, seasonal_runs,
    write_csv,
)


def _series(start, n, city="c"):
    dates = np.datetime64(start) + np.arange(n)
    t = np.linspace(-5, 25, n) if n else np.array([])
    h = np.linspace(30, 90, n) if n else np.array([])
    return RawSeries(city, dates, t, h)


def _write(tmp_path, body):
    p = tmp_path / "city.csv"
    p.write_text("date,temperature_c,humidity_pct\n" + body, encoding="utf-8")
    return p


def test_load_csv_happy_path(tmp_path):
    p = _write(tmp_path, "2020-01-01,1.5,60\n2020-01-02,2.0,61.5\n2020-01-03,-3,70\n")
    s = load_csv(p)
    assert len(s) == 3 and s.city == "city"
    assert s.records[2] == (dt.date(2020, 1, 3), -3.0, 70.0)


def test_load_csv_humidity_range_names_line(tmp_path):
    p = _write(tmp_path, "2020-01-01,1.5,60\n2020-01-02,2.0,101\n")
    with pytest.raises(DataError, match="line 3"):
        load_csv(p)


def test_load_csv_duplicate_date(tmp_path):
    p = _write(tmp_path, "2020-01-01,1.5,60\n2020-01-01,2.0,61\n")
    with pytest.raises(DataError, match="strictly increasing"):
        load_csv(p)


@pytest.mark.parametrize("row", ["2020-01-02,,50", "2020-01-02,1", "2020-13-02,1,50", "2020-01-02,99,50"])
def test_load_csv_rejects_bad_rows(tmp_path, row):
    p = _write(tmp_path, "2020-01-01,1.5,60\n" + row + "\n")
    with pytest.raises(DataError, match="line 3"):
        load_csv(p)


def test_load_csv_bad_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("day,t,h\n")
    with pytest.raises(DataError, match="line 1"):
        load_csv(p)


def test_csv_roundtrip(tmp_path, synthetic_city):
    write_csv(synthetic_city, tmp_path / "s.csv")
    assert load_csv(tmp_path / "s.csv", synthetic_city.city) == synthetic_city


def test_minmax_and_denormalize():
    assert minmax_normalize(2.0, 2.0, 7.0) == 0
    assert minmax_normalize(7.0, 2.0, 7.0) == 1
    assert minmax_normalize(5, 0, 10) == 0.5
    assert denormalize(0, 2.0, 7.0) == 2.0
    assert denormalize(1, 2.0, 7.0) == 7.0
    with pytest.raises(ValueError):
        minmax_normalize(1, 3, 3)
    with pytest.raises(ValueError):
        denormalize(1, 4, 3)


def test_normalization_roundtrip(rng):
    x = rng.uniform(-50, 50, 1000)
    back = denormalize(minmax_normalize(x, -30.0, 40.0), -30.0, 40.0)
    assert np.max(np.abs(back - x)) < 1e-12


def test_split_defaults(synthetic_city):
    train, test = chronological_split(synthetic_city)
    assert train.dates[0] == np.datetime64("2014-03-01")
    assert train.dates[-1] == np.datetime64("2019-02-28")
    assert test.dates[0] == np.datetime64("2019-03-01")
    assert test.dates[-1] == np.datetime64("2020-02-29")
    ratio = len(train) / (len(train) + len(test))
    assert abs(ratio - 0.85) <= 0.02


def test_split_is_partition():
    s = _series("2014-03-01", (dt.date(2020, 2, 29) - dt.date(2014, 3, 1)).days + 1)
    train, test = chronological_split(s)
    merged = np.concatenate([train.dates, test.dates])
    np.testing.assert_array_equal(merged, s.dates)
    assert not set(train.dates.tolist()) & set(test.dates.tolist())


def test_split_errors():
    s = _series("2014-03-01", 2000)  # ends 2019-08
    with pytest.raises(DataError, match="cover"):
        chronological_split(s)
    s = _series("2014-03-01", 400)
    cfg = SplitConfig(dt.date(2014, 3, 1), s.dates[-1].item(), s.dates[-1].item())
    with pytest.raises(DataError, match="empty test"):
        chronological_split(s, cfg)


def test_seasonal_runs_spring_full_year():
    s = _series("2015-01-01", 365)
    (run,) = seasonal_runs(s, Season.SPRING)
    assert run.dates[0] == np.datetime64("2015-03-01") and run.dates[-1] == np.datetime64("2015-05-31")


def test_winter_run_crosses_year_boundary():
    s = _series("2014-12-01", 90)  # through 2015-02-28
    runs = seasonal_runs(s, Season.WINTER)
    assert len(runs) == 1 and len(runs[0]) == 90


def test_seasonal_runs_empty_and_gaps():
    summer = _series("2015-06-01", 92)
    assert seasonal_runs(summer, Season.WINTER) == []
    gap = summer.subset(np.arange(len(summer)) != 10)
    assert [len(r) for r in seasonal_runs(gap, Season.SUMMER)] == [10, 81]


def test_seasonal_runs_cover_exactly(synthetic_city):
    seen = []
    for season in Season:
        runs = seasonal_runs(synthetic_city, season)
        for r in runs:
            assert set(r.months().tolist()) <= set(season.months)
            seen.extend(r.dates.tolist())
    assert sorted(seen) == synthetic_city.dates.tolist()


def _enumerate_windows(m, lag):
    # every t with t-lag+1 >= 0 and t+1 <= m-1
    return [t for t in range(m) if t - lag + 1 >= 0 and t + 1 <= m - 1]


@pytest.mark.parametrize("m,lag,expected", [(5, 3, 2), (4, 3, 1), (3, 3, 0), (3, 2, 1), (2, 2, 0)])
def test_window_counts(m, lag, expected):
    s = _series("2015-06-01", m)
    norm = NormalizationParams(-10, 40, 0, 100)
    spec = WindowSpec(3 if lag == 3 else 1)
    assert len(build_windows([s], spec, norm)) == expected == len(_enumerate_windows(m, lag))


def test_window_contents_match_raw(synthetic_city):
    spec = WindowSpec(4)
    segs = seasonal_runs(synthetic_city, Season.AUTUMN)[:2]
    norm = NormalizationParams.fit(segs)
    ss = build_windows(segs, spec, norm)
    lookup = {d: (t, h) for d, t, h in zip(synthetic_city.dates, synthetic_city.temperature,
                                           synthetic_city.humidity)}
    for row, target, raw, day in zip(ss.inputs, ss.targets, ss.raw_targets, ss.target_dates):
        lags = [day - k for k in (3, 2, 1)]
        t_back = denormalize(row[:3], norm.t_min, norm.t_max)
        h_back = denormalize(row[3:], norm.h_min, norm.h_max)
        assert np.allclose(t_back, [lookup[d][0] for d in lags], atol=1e-12, rtol=0)
        assert np.allclose(h_back, [lookup[d][1] for d in lags], atol=1e-12, rtol=0)
        assert raw == lookup[day][1]
        assert abs(denormalize(target, norm.h_min, norm.h_max) - raw) < 1e-12
    assert ss.inputs.min() >= 0 and ss.inputs.max() <= 1


def test_windows_never_cross_segments():
    a = _series("2015-06-01", 4)
    b = _series("2015-07-01", 4)
    ss = build_windows([a, b], WindowSpec(3), NormalizationParams(-10, 40, 0, 100))
    assert len(ss) == 2


def test_window_spec():
    assert WindowSpec(1).input_width == 4 and WindowSpec(3).input_width == 6
    assert WindowSpec(2).target_kind == "humidity" and WindowSpec(3).target_kind == "temperature"
    with pytest.raises(ValueError):
        WindowSpec(5)


def test_persistence_forecast_is_today(synthetic_city):
    segs = seasonal_runs(synthetic_city, Season.SPRING)[:1]
    for tid in (1, 2, 3, 4):
        ss = build_windows(segs, WindowSpec(tid), NormalizationParams.fit(segs))
        col = synthetic_city.temperature if ss.spec.target_kind == "temperature" else synthetic_city.humidity
        lookup = dict(zip(synthetic_city.dates, col))
        expected = [lookup[d - 1] for d in ss.target_dates]
        assert np.allclose(ss.persistence_forecast(), expected, atol=1e-12)


def test_synthetic_determinism_and_ranges():
    a = generate_synthetic(3, 2)
    b = generate_synthetic(3, 2)
    assert a == b
    assert a != generate_synthetic(4, 2)
    big = generate_synthetic(11, 7)
    assert np.all((big.humidity >= 0) & (big.humidity <= 100))
    t = big.temperature
    assert np.corrcoef(t[:-1], t[1:])[0, 1] > 0.8


def test_synthetic_summer_calmer_than_winter(synthetic_city):
    def day_to_day(season):
        return np.concatenate([np.diff(r.temperature) for r in seasonal_runs(synthetic_city, season)]).std()
    assert day_to_day(Season.SUMMER) < day_to_day(Season.WINTER)


def test_raw_series_invariants():
    with pytest.raises(DataError):
        RawSeries("x", np.array(["2020-01-02", "2020-01-01"], dtype="datetime64[D]"), [1, 2], [3, 4])
    with pytest.raises(DataError):
        RawSeries("x", np.array(["2020-01-01"], dtype="datetime64[D]"), [61], [3])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 12), min_size=1, max_size=6), st.sampled_from([1, 3]))
def test_window_count_over_random_segments(lengths, tid):
    spec = WindowSpec(tid)
    segs = []
    start = np.datetime64("2015-06-01")
    for m in lengths:
        segs.append(_series(start, m))
        start = start + m + 5
    ss = build_windows(segs, spec, NormalizationParams(-10, 40, 0, 100))
    assert len(ss) == sum(len(_enumerate_windows(m, spec.lag_count)) for m in lengths)
