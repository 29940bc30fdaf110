"""Build a synthetic city, split it, and turn one season into lag windows.

Run: python demos/01_synthetic_data.py
"""
import numpy as np

from meteonn.dataset import (
    NormalizationParams, Season, WindowSpec, build_windows, chronological_split, generate_synthetic,
    seasonal_runs,
)
from meteonn.metrics import rmse

city = generate_synthetic(seed=7, years=7)
print(f"{len(city)} days, {city.dates[0]} .. {city.dates[-1]}")

train, test = chronological_split(city)
print(f"train {len(train)} days, test {len(test)} days, "
      f"ratio {len(train) / (len(train) + len(test)):.3f}")

# winter runs span Dec-Feb across the year boundary
for run in seasonal_runs(train, Season.WINTER):
    print(f"  winter run {run.dates[0]} .. {run.dates[-1]} ({len(run)} days)")

# testing 3: six inputs (T_{t-2..t}, H_{t-2..t}) predicting T_{t+1}
spec = WindowSpec(3)
segs = seasonal_runs(train, Season.SUMMER)
norm = NormalizationParams.fit(segs)
samples = build_windows(segs, spec, norm)
print(f"summer training windows: {samples.inputs.shape}, targets in [{samples.targets.min():.2f}, "
      f"{samples.targets.max():.2f}]")
print("first window:", np.round(samples.inputs[0], 3), "->", round(samples.targets[0], 3))

test_samples = build_windows(seasonal_runs(test, Season.SUMMER), spec, norm)
print(f"persistence RMSE on the summer test year: "
      f"{rmse(test_samples.raw_targets, test_samples.persistence_forecast()):.3f} degC")
