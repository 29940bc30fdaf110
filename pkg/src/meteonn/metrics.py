"""RMSE, MAPE, MAE and Theil's U on original-unit values.

The ratio metrics (MAPE, Theil's U) accept an ``offset`` added to the
magnitudes in their denominators. Temperatures are scored with 273.15 so the
denominators are absolute temperatures; errors themselves are never shifted.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

KELVIN_OFFSET = 273.15
METRIC_NAMES = ("rmse", "mape", "mae", "theils_u")


class MetricError(ValueError):
    pass


def _pair(actual, predicted):
    y = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    if y.shape != p.shape:
        raise MetricError(f"length mismatch: {y.size} actual vs {p.size} predicted")
    if y.size == 0:
        raise MetricError("empty input")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(p))):
        raise MetricError("non-finite input")
    return y, p


def rmse(actual, predicted) -> float:
    y, p = _pair(actual, predicted)
    return float(np.sqrt(np.mean((y - p) ** 2)))


def mape(actual, predicted, offset: float = 0.0) -> float:
    """Mean absolute percentage error, in percent."""
    y, p = _pair(actual, predicted)
    denom = y + offset
    bad = np.flatnonzero(np.abs(denom) <= 1e-9)
    if bad.size:
        raise MetricError(f"near-zero MAPE denominator at indices {bad.tolist()}")
    return float(100.0 * np.mean(np.abs((y - p) / denom)))


def mae(actual, predicted) -> float:
    y, p = _pair(actual, predicted)
    return float(np.mean(np.abs(y - p)))


def theils_u(actual, predicted, offset: float = 0.0) -> float:
    y, p = _pair(actual, predicted)
    denom = np.sqrt(np.mean((y + offset) ** 2)) + np.sqrt(np.mean((p + offset) ** 2))
    if denom <= 0:
        raise MetricError("Theil's U denominator is zero")
    return float(np.sqrt(np.mean((y - p) ** 2)) / denom)


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    mape: float
    mae: float
    theils_u: float
    offset: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def metric_report(actual, predicted, offset: float = 0.0) -> MetricReport:
    return MetricReport(rmse(actual, predicted), mape(actual, predicted, offset),
                        mae(actual, predicted), theils_u(actual, predicted, offset), offset)


def offset_for(target_kind: str, temperature_offset: float = KELVIN_OFFSET,
               humidity_offset: float = 0.0) -> float:
    return temperature_offset if target_kind == "temperature" else humidity_offset


def evaluate(model, test_samples, norm=None, temperature_offset: float = KELVIN_OFFSET,
             humidity_offset: float = 0.0) -> MetricReport:
    """Score a trained model on a test SampleSet in original units."""
    from .dataset import denormalize
    from .models import predict

    if len(test_samples) == 0:
        raise MetricError("empty test set")
    norm = norm or test_samples.norm
    kind = test_samples.spec.target_kind
    lo, hi = norm.target_range(kind)
    pred = denormalize(predict(model, test_samples.inputs, test_samples.spec), lo, hi)
    actual = denormalize(test_samples.targets, lo, hi)
    return metric_report(actual, pred, offset_for(kind, temperature_offset, humidity_offset))
