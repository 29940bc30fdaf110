"""Closed-form ELM fit and the three-member ensemble used in the grid.

Run: python demos/04_elm.py
"""
import numpy as np

from meteonn.dataset import NormalizationParams, Season, WindowSpec, build_windows, chronological_split, \
    generate_synthetic, seasonal_runs
from meteonn.metrics import evaluate
from meteonn.models import elm_hidden
from meteonn.training import elm_ensemble_fit, elm_fit, elm_member_seeds

city = generate_synthetic(seed=7, years=7)
train, test = chronological_split(city)
spec = WindowSpec(4)  # six inputs predicting tomorrow's humidity
segs = seasonal_runs(train, Season.SPRING)
norm = NormalizationParams.fit(segs)
tr = build_windows(segs, spec, norm)
te = build_windows(seasonal_runs(test, Season.SPRING), spec, norm)

single = elm_fit(tr, n_hidden=20, seed=3)
G = elm_hidden(single, tr.inputs)
grad = G.T @ (G @ single.alpha[:, 0] - tr.targets)
print(f"hidden matrix {G.shape}, condition number {np.linalg.cond(G):.2e}")
print(f"least-squares optimality |G'(Ga - C)|_inf / |G'C|_inf = "
      f"{np.abs(grad).max() / np.abs(G.T @ tr.targets).max():.2e}")
print("single ELM:", evaluate(single, te))

ensemble = elm_ensemble_fit(tr, 20, elm_member_seeds(base_seed=3))
print("3-member ensemble:", evaluate(ensemble, te))
