"""Gradient check against finite differences, then SGD training of ANN and LSTM-PC.

Run: python demos/03_training.py
"""
import numpy as np

from meteonn.dataset import NormalizationParams, Season, WindowSpec, build_windows, chronological_split, \
    generate_synthetic, seasonal_runs
from meteonn.metrics import evaluate
from meteonn.models import init_lstm, sequence_forward
from meteonn.core_math import SeededRng
from meteonn.training import TrainConfig, bptt, mse_loss, train_iterative

spec = WindowSpec(3)
p = init_lstm("LSTM_PC", SeededRng(0), hidden=4)
window, y = np.full(6, 0.4), 0.7
analytic = bptt("LSTM_PC", p, window, y, spec)

# central difference on one peephole weight
eps = 1e-6
bumped = p.w_peep.copy()
bumped[2, 1] += eps
up = mse_loss(sequence_forward(p.with_arrays({"w_peep": bumped}), window, spec)[0], y)
bumped[2, 1] -= 2 * eps
down = mse_loss(sequence_forward(p.with_arrays({"w_peep": bumped}), window, spec)[0], y)
print(f"d loss / d w_co[1]: analytic {analytic['w_peep'][2, 1]:.8f}, numeric {(up - down) / (2 * eps):.8f}")

city = generate_synthetic(seed=7, years=7)
train, test = chronological_split(city)
segs = seasonal_runs(train, Season.AUTUMN)
norm = NormalizationParams.fit(segs)
tr = build_windows(segs, spec, norm)
te = build_windows(seasonal_runs(test, Season.AUTUMN), spec, norm)

for kind, lr in (("ANN", 0.3), ("LSTM_PC", 0.009)):
    params, history = train_iterative(kind, tr, TrainConfig(lr, 2500, seed=1, epoch_scale=0.1))
    losses = history.epoch_loss
    print(f"{kind}: {len(losses)} epochs, loss {losses[0]:.5f} -> {losses[-1]:.5f}")
    print("   test:", evaluate(params, te))
