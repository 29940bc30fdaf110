"""Forward passes of the five architectures on one lag window.

Run: python demos/02_forward_passes.py
"""
import numpy as np

from meteonn.core_math import SeededRng
from meteonn.dataset import WindowSpec
from meteonn.models import (
    LstmPcParams, elm_predict, feedforward_forward, init_elm, init_feedforward, init_lstm, lstm_step,
    lstm_pc_step, sequence_forward,
)

spec = WindowSpec(3)
window = np.array([0.61, 0.64, 0.66, 0.42, 0.55, 0.47])  # T lags, then H lags

for kind in ("ANN", "DNN"):
    p = init_feedforward(kind, spec.input_width, SeededRng(1))
    print(kind, "layer sizes", p.sizes, "->", round(feedforward_forward(p, window)[0], 4))

elm = init_elm(spec.input_width, 20, SeededRng(2))
print("ELM (unfitted, output weights zero) ->", elm_predict(elm, window))

for kind in ("LSTM", "LSTM_PC"):
    p = init_lstm(kind, SeededRng(3), hidden=4)
    yhat, caches = sequence_forward(p, window, spec)
    print(kind, f"{len(caches)} steps ->", round(yhat, 4))
    for t, c in enumerate(caches):
        print(f"   step {t}: x={c.x}, forget gate={np.round(c.f, 3)}")

# a peephole cell with zero peephole weights is a plain LSTM cell
plain = init_lstm("LSTM", SeededRng(4), hidden=3)
pc = LstmPcParams.from_lstm(plain)
h0 = np.zeros(3)
c0 = np.array([0.2, -0.1, 0.4])
print("zero-peephole difference:",
      np.max(np.abs(lstm_step(plain, [0.5, 0.5], h0, c0)[0] - lstm_pc_step(pc, [0.5, 0.5], h0, c0)[0])))
