"""Daily temperature/humidity series: CSV I/O, splitting, seasons, lag windows."""
from __future__ import annotations

import csv
import datetime as dt
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core_math import SeededRng

CSV_HEADER = ("date", "temperature_c", "humidity_pct")
TEMP_BAND = (-60.0, 60.0)

DEFAULT_TRAIN_START = dt.date(2014, 3, 1)
DEFAULT_TRAIN_END = dt.date(2019, 2, 28)
DEFAULT_TEST_END = dt.date(2020, 2, 29)


class DataError(ValueError):
    """Input data is malformed, inconsistent, or does not cover what is needed."""


class Season(enum.Enum):
    SPRING = (3, 4, 5)
    SUMMER = (6, 7, 8)
    AUTUMN = (9, 10, 11)
    WINTER = (12, 1, 2)

    @property
    def months(self) -> tuple[int, ...]:
        return self.value

    @classmethod
    def parse(cls, name: str) -> "Season":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown season {name!r}") from None


@dataclass(frozen=True, eq=False)
class RawSeries:
    """Daily observations for one city, dates strictly increasing."""

    city: str
    dates: np.ndarray  # datetime64[D]
    temperature: np.ndarray
    humidity: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        t = np.asarray(self.temperature, dtype=np.float64)
        h = np.asarray(self.humidity, dtype=np.float64)
        if not (dates.shape == t.shape == h.shape) or dates.ndim != 1:
            raise DataError("dates, temperature and humidity must be 1-D and equally long")
        if len(dates) > 1 and np.any(np.diff(dates).astype(np.int64) <= 0):
            i = int(np.flatnonzero(np.diff(dates).astype(np.int64) <= 0)[0]) + 1
            raise DataError(f"dates not strictly increasing at index {i} ({dates[i]})")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(h))):
            raise DataError("non-finite observation")
        if np.any((h < 0) | (h > 100)):
            raise DataError("humidity outside [0, 100]")
        if np.any((t < TEMP_BAND[0]) | (t > TEMP_BAND[1])):
            raise DataError(f"temperature outside {TEMP_BAND}")
        for name, arr in (("dates", dates), ("temperature", t), ("humidity", h)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.dates)

    def __eq__(self, other):
        if not isinstance(other, RawSeries):
            return NotImplemented
        return (self.city == other.city and np.array_equal(self.dates, other.dates)
                and np.array_equal(self.temperature, other.temperature)
                and np.array_equal(self.humidity, other.humidity))

    @property
    def records(self) -> list[tuple[dt.date, float, float]]:
        return [(d.item(), float(t), float(h))
                for d, t, h in zip(self.dates, self.temperature, self.humidity)]

    def subset(self, mask) -> "RawSeries":
        return RawSeries(self.city, self.dates[mask], self.temperature[mask], self.humidity[mask])

    def months(self) -> np.ndarray:
        return self.dates.astype("datetime64[M]").astype(np.int64) % 12 + 1


def load_csv(path, city: str | None = None) -> RawSeries:
    """Read a ``date,temperature_c,humidity_pct`` file.

    Errors name the offending line (1-based, header is line 1).
    """
    path = Path(path)
    city = city or path.stem
    dates, temps, hums = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(c.strip() for c in header) != CSV_HEADER:
            raise DataError(f"{path}: line 1: expected header {','.join(CSV_HEADER)}")
        prev = None
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 3 or any(not c.strip() for c in row):
                raise DataError(f"{path}: line {line}: expected 3 non-empty fields, got {row!r}")
            try:
                day = dt.date.fromisoformat(row[0].strip())
                t = float(row[1])
                h = float(row[2])
            except ValueError as exc:
                raise DataError(f"{path}: line {line}: {exc}") from None
            if not (math.isfinite(t) and math.isfinite(h)):
                raise DataError(f"{path}: line {line}: non-finite value")
            if not 0.0 <= h <= 100.0:
                raise DataError(f"{path}: line {line}: humidity {h} outside [0, 100]")
            if not TEMP_BAND[0] <= t <= TEMP_BAND[1]:
                raise DataError(f"{path}: line {line}: temperature {t} outside {TEMP_BAND}")
            if prev is not None and day <= prev:
                raise DataError(f"{path}: line {line}: date {day} not after {prev} "
                                "(dates must be strictly increasing)")
            prev = day
            dates.append(day)
            temps.append(t)
            hums.append(h)
    return RawSeries(city, np.array(dates, dtype="datetime64[D]"), np.array(temps), np.array(hums))


def write_csv(series: RawSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for d, t, h in zip(series.dates, series.temperature, series.humidity):
            w.writerow((str(d), repr(float(t)), repr(float(h))))


def minmax_normalize(x, lo: float, hi: float):
    if not lo < hi:
        raise ValueError(f"degenerate normalization range [{lo}, {hi}]")
    return (x - lo) / (hi - lo)


def denormalize(u, lo: float, hi: float):
    if not lo < hi:
        raise ValueError(f"degenerate normalization range [{lo}, {hi}]")
    return u * (hi - lo) + lo


@dataclass(frozen=True)
class SplitConfig:
    train_start: dt.date = DEFAULT_TRAIN_START
    train_end: dt.date = DEFAULT_TRAIN_END
    test_end: dt.date = DEFAULT_TEST_END


def chronological_split(series: RawSeries, split: SplitConfig = SplitConfig()):
    """Return ``(train, test)`` with train in [train_start, train_end] and
    test in (train_end, test_end]. Records outside both ranges are dropped."""
    if len(series) == 0:
        raise DataError(f"{series.city}: empty series")
    first, last = series.dates[0].item(), series.dates[-1].item()
    if first > split.train_start or last < split.test_end:
        raise DataError(f"{series.city}: data {first}..{last} does not cover "
                        f"{split.train_start}..{split.test_end}")
    d = series.dates
    train_mask = (d >= np.datetime64(split.train_start)) & (d <= np.datetime64(split.train_end))
    test_mask = (d > np.datetime64(split.train_end)) & (d <= np.datetime64(split.test_end))
    if not train_mask.any():
        raise DataError(f"{series.city}: empty training partition")
    if not test_mask.any():
        raise DataError(f"{series.city}: empty test partition")
    return series.subset(train_mask), series.subset(test_mask)


def seasonal_runs(series: RawSeries, season: Season) -> list[RawSeries]:
    """Maximal runs of consecutive calendar days falling in ``season``.

    Dec-Jan-Feb is one run across the year boundary; a missing day ends a run.
    """
    if len(series) == 0:
        return []
    in_season = np.isin(series.months(), season.months)
    day = series.dates.astype(np.int64)
    runs = []
    start = None
    for i in range(len(series)):
        if in_season[i] and start is not None and day[i] == day[i - 1] + 1:
            continue
        if start is not None:
            runs.append((start, i))
            start = None
        if in_season[i]:
            start = i
    if start is not None:
        runs.append((start, len(series)))
    return [series.subset(slice(a, b)) for a, b in runs]


@dataclass(frozen=True)
class WindowSpec:
    testing_id: int

    def __post_init__(self):
        if self.testing_id not in (1, 2, 3, 4):
            raise ValueError(f"testing_id must be 1..4, got {self.testing_id}")

    @property
    def lag_count(self) -> int:
        return 2 if self.testing_id in (1, 2) else 3

    @property
    def target_kind(self) -> str:
        return "temperature" if self.testing_id in (1, 3) else "humidity"

    @property
    def input_width(self) -> int:
        return 2 * self.lag_count

    @property
    def target_today_column(self) -> int:
        """Input column holding today's value of the target variable."""
        L = self.lag_count
        return L - 1 if self.target_kind == "temperature" else 2 * L - 1


@dataclass(frozen=True)
class NormalizationParams:
    t_min: float
    t_max: float
    h_min: float
    h_max: float

    def __post_init__(self):
        if not (self.t_min < self.t_max and self.h_min < self.h_max):
            raise DataError(f"degenerate normalization range {self}")

    @classmethod
    def fit(cls, segments) -> "NormalizationParams":
        segments = [s for s in segments if len(s)]
        if not segments:
            raise DataError("no data to fit normalization")
        t = np.concatenate([s.temperature for s in segments])
        h = np.concatenate([s.humidity for s in segments])
        return cls(float(t.min()), float(t.max()), float(h.min()), float(h.max()))

    def target_range(self, kind: str) -> tuple[float, float]:
        return (self.t_min, self.t_max) if kind == "temperature" else (self.h_min, self.h_max)


@dataclass(frozen=True, eq=False)
class SampleSet:
    inputs: np.ndarray       # (n, 2L) normalized: T lags oldest first, then H lags
    targets: np.ndarray      # (n,) normalized
    raw_targets: np.ndarray  # (n,) original units
    spec: WindowSpec
    norm: NormalizationParams
    target_dates: np.ndarray = field(default_factory=lambda: np.array([], dtype="datetime64[D]"))

    def __len__(self) -> int:
        return len(self.targets)

    def denormalize_targets(self, u):
        return denormalize(u, *self.norm.target_range(self.spec.target_kind))

    def persistence_forecast(self) -> np.ndarray:
        """Raw-unit 'tomorrow equals today' forecast for every sample."""
        return self.denormalize_targets(self.inputs[:, self.spec.target_today_column])


def window_positions(m: int, lag_count: int) -> list[int]:
    """Indices t in a run of length m that have lag_count days ending at t and a day t+1."""
    return list(range(lag_count - 1, m - 1))


def build_windows(segments, spec: WindowSpec, norm: NormalizationParams) -> SampleSet:
    L = spec.lag_count
    rows, targets, raw, tdates = [], [], [], []
    for seg in segments:
        tn = minmax_normalize(seg.temperature, norm.t_min, norm.t_max)
        hn = minmax_normalize(seg.humidity, norm.h_min, norm.h_max)
        target_raw = seg.temperature if spec.target_kind == "temperature" else seg.humidity
        target_norm = tn if spec.target_kind == "temperature" else hn
        for t in window_positions(len(seg), L):
            rows.append(np.concatenate([tn[t - L + 1:t + 1], hn[t - L + 1:t + 1]]))
            targets.append(target_norm[t + 1])
            raw.append(target_raw[t + 1])
            tdates.append(seg.dates[t + 1])
    inputs = np.array(rows, dtype=np.float64).reshape(len(rows), 2 * L)
    return SampleSet(inputs, np.array(targets, dtype=np.float64), np.array(raw, dtype=np.float64),
                     spec, norm, np.array(tdates, dtype="datetime64[D]"))


@dataclass(frozen=True)
class SyntheticProfile:
    """Parameters of the synthetic daily climate.

    Temperature is an annual sinusoid peaking near ``t_peak_doy`` plus an
    AR(1) anomaly whose innovation scale is larger in winter than summer.
    Humidity sits on an anti-phase sinusoid plus its own AR(1) anomaly, and
    tomorrow's temperature anomaly leans on today's humidity anomaly.
    """

    start: dt.date = dt.date(2014, 1, 1)
    city: str = "synthetic"
    t_mean: float = 13.0
    t_amp: float = 12.0
    t_peak_doy: int = 210
    t_ar: float = 0.6
    t_sigma_summer: float = 1.2
    t_sigma_winter: float = 2.6
    h_mean: float = 65.0
    h_amp: float = 8.0
    h_ar: float = 0.5
    h_sigma: float = 8.0
    h_to_t: float = -0.12


def generate_synthetic(seed: int, years: int = 7, profile: SyntheticProfile = SyntheticProfile()) -> RawSeries:
    if years < 1:
        raise ValueError("years must be >= 1")
    p = profile
    end = dt.date(p.start.year + years, p.start.month, min(p.start.day, 28))
    n = (end - p.start).days
    rng = SeededRng(seed)
    dates = np.datetime64(p.start) + np.arange(n)
    doy = (dates - dates.astype("datetime64[Y]")).astype(np.int64) + 1
    phase = 2 * np.pi * (doy - p.t_peak_doy) / 365.25
    # 1 in midsummer, 0 in midwinter
    warm = 0.5 * (1 + np.cos(phase))
    sigma_t = p.t_sigma_winter + (p.t_sigma_summer - p.t_sigma_winter) * warm
    temp = np.empty(n)
    hum = np.empty(n)
    ta = ha = 0.0
    for i in range(n):
        ta = p.t_ar * ta + p.h_to_t * ha + sigma_t[i] * rng.normal()
        ha = p.h_ar * ha + p.h_sigma * rng.normal()
        temp[i] = p.t_mean + p.t_amp * np.cos(phase[i]) + ta
        hum[i] = p.h_mean - p.h_amp * np.cos(phase[i]) + ha
    temp = np.clip(temp, *TEMP_BAND)
    hum = np.clip(hum, 0.0, 100.0)
    return RawSeries(p.city, dates, np.round(temp, 3), np.round(hum, 3))
