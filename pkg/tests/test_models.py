import numpy as np
import pytest

from meteonn.core_math import SeededRng, ShapeError
from meteonn.dataset import WindowSpec
from meteonn.models import (
    ElmParams, FeedforwardParams, LstmParams, LstmPcParams, ModelKind, elm_predict, feedforward_forward,
    init_elm, init_feedforward, init_lstm, lstm_pc_step, lstm_step, sequence_forward,
)

from oracles import naive_feedforward, naive_lstm_step, naive_sequence, random_feedforward, random_lstm


def test_feedforward_all_zero_is_half():
    p = init_feedforward("DNN", 6, SeededRng(0))
    p = p.with_arrays({k: np.zeros_like(v) for k, v in p.named_arrays().items()})
    y, acts = feedforward_forward(p, np.ones(6))
    assert y == 0.5
    assert all(np.all(a == 0.5) for a in acts[1:])


def test_feedforward_saturates():
    p = FeedforwardParams(ModelKind.ANN, ((np.zeros((1, 1)), np.array([1e6])),))
    assert abs(feedforward_forward(p, [0.3])[0] - 1.0) < 1e-9


@pytest.mark.parametrize("kind,width", [("ANN", 4), ("ANN", 6), ("DNN", 4), ("DNN", 6)])
def test_feedforward_matches_naive(rng, kind, width):
    for _ in range(20):
        p = random_feedforward(rng, kind, width)
        x = rng.random(width)
        y = feedforward_forward(p, x)[0]
        assert abs(y - naive_feedforward(p, x)) < 1e-12
        assert 0 < y < 1


def test_feedforward_shapes():
    p = init_feedforward("ANN", 4, SeededRng(1))
    assert p.sizes == (4, 3, 1)
    assert init_feedforward("DNN", 6, SeededRng(1)).sizes == (6, 3, 3, 1)
    with pytest.raises(ShapeError):
        feedforward_forward(p, np.ones(6))
    with pytest.raises(ShapeError):
        FeedforwardParams(ModelKind.ANN, ((np.zeros((3, 4)), np.zeros(3)), (np.zeros((2, 3)), np.zeros(2))))


def test_elm_predict_cases(rng):
    p = init_elm(4, 5, SeededRng(2))
    assert elm_predict(p, rng.random(4)) == 0.0
    one = ElmParams(np.zeros((1, 3)), np.zeros(1), np.array([[2.0]]))
    assert elm_predict(one, [0.1, 0.2, 0.3]) == 1.0
    for _ in range(20):
        n, d = 7, 6
        q = ElmParams(rng.normal(size=(n, d)), rng.normal(size=n), rng.normal(size=(n, 1)))
        x = rng.random(d)
        naive = sum(q.alpha[i, 0] / (1 + np.exp(-(sum(q.w[i, j] * x[j] for j in range(d)) + q.b[i])))
                    for i in range(n))
        assert abs(elm_predict(q, x) - naive) < 1e-12
    with pytest.raises(ShapeError):
        elm_predict(q, np.ones(4))


def _zero_lstm(nh, peephole=False):
    base = LstmParams(np.zeros((4, nh, 2)), np.zeros((4, nh, nh)), np.zeros((4, nh)), np.zeros(nh), np.zeros(1))
    return LstmPcParams.from_lstm(base) if peephole else base


def test_lstm_step_zero_params():
    h, c, cache = lstm_step(_zero_lstm(3), [0.4, 0.6], np.zeros(3), np.zeros(3))
    assert np.all(cache.i == 0.5) and np.all(cache.f == 0.5) and np.all(cache.o == 0.5)
    assert np.all(cache.c_bar == 0) and np.all(c == 0) and np.all(h == 0)


def test_lstm_step_zero_params_unit_cell():
    h, c, _ = lstm_step(_zero_lstm(1), [0.4, 0.6], np.zeros(1), np.ones(1))
    assert c[0] == 0.5
    assert abs(h[0] - 0.5 * np.tanh(0.5)) < 1e-15
    assert abs(h[0] - 0.2310585786300049) < 1e-12


@pytest.mark.parametrize("peephole", [False, True])
def test_lstm_step_matches_naive(rng, peephole):
    step = lstm_pc_step if peephole else lstm_step
    for nh in (1, 2, 4):
        for _ in range(10):
            p = random_lstm(rng, nh, peephole)
            x, hp, cp = rng.random(2), rng.normal(size=nh), rng.normal(size=nh)
            h, c, cache = step(p, x, hp, cp)
            ref = naive_lstm_step(p, x, hp, cp, peephole)
            for name in ("i", "f", "c_bar", "c", "o", "h"):
                np.testing.assert_allclose(getattr(cache, name), ref[name], rtol=0, atol=1e-12)
            assert np.all((cache.i > 0) & (cache.i < 1) & (cache.o > 0) & (cache.o < 1))
            assert np.all(np.abs(cache.c_bar) < 1)


def test_peephole_output_gate_sees_new_cell():
    p = _zero_lstm(1, peephole=True)
    p = p.with_arrays({"w_peep": np.array([[0.0], [0.0], [1.0]])})
    h, c, cache = lstm_pc_step(p, [0.3, 0.3], np.zeros(1), np.zeros(1))
    assert c[0] == 0 and cache.o[0] == 0.5 and h[0] == 0


def test_zero_peephole_equals_lstm(rng):
    for _ in range(1000):
        nh = int(rng.integers(1, 5))
        base = random_lstm(rng, nh, False)
        pc = LstmPcParams.from_lstm(base)
        x, hp, cp = rng.random(2), rng.normal(size=nh), rng.normal(size=nh)
        h1, c1, _ = lstm_step(base, x, hp, cp)
        h2, c2, _ = lstm_pc_step(pc, x, hp, cp)
        assert np.max(np.abs(h1 - h2)) <= 1e-12 and np.max(np.abs(c1 - c2)) <= 1e-12


def test_sequence_forward_zero_params_returns_bias():
    p = _zero_lstm(4).with_arrays({"b_out": np.array([0.37])})
    assert sequence_forward(p, np.full(6, 0.5), WindowSpec(3))[0] == 0.37


def test_sequence_forward_is_chained_steps(rng):
    p = random_lstm(rng, 3, False)
    window = rng.random(4)  # T_{t-1}, T_t, H_{t-1}, H_t
    h, c, _ = lstm_step(p, [window[0], window[2]], np.zeros(3), np.zeros(3))
    h, c, _ = lstm_step(p, [window[1], window[3]], h, c)
    y, caches = sequence_forward(p, window, WindowSpec(1))
    assert y == p.w_out @ h + p.b_out[0]
    assert len(caches) == 2


@pytest.mark.parametrize("peephole", [False, True])
def test_sequence_forward_matches_unroll_oracle(rng, peephole):
    for _ in range(20):
        p = random_lstm(rng, 4, peephole)
        w = rng.random(6)
        assert abs(sequence_forward(p, w, WindowSpec(3))[0] - naive_sequence(p, w, 3, peephole)) < 1e-12


def test_sequence_forward_rejects_wrong_window(rng):
    with pytest.raises(ShapeError):
        sequence_forward(random_lstm(rng, 2, False), np.ones(4), WindowSpec(3))


def test_forward_is_pure_and_caches_replay(rng):
    p = random_lstm(rng, 3, True)
    w = rng.random(6)
    y1, caches = sequence_forward(p, w, WindowSpec(3))
    y2, _ = sequence_forward(p, w, WindowSpec(3))
    assert y1 == y2
    for cache in caches:
        h, c, _ = lstm_pc_step(p, cache.x, cache.h_prev, cache.c_prev)
        assert np.array_equal(h, cache.h) and np.array_equal(c, cache.c)


def test_init_shapes_and_determinism():
    a = init_lstm("LSTM_PC", SeededRng(5), hidden=4)
    b = init_lstm("LSTM_PC", SeededRng(5), hidden=4)
    assert isinstance(a, LstmPcParams) and a.w_peep.shape == (3, 4)
    for k in a.named_arrays():
        assert np.array_equal(a.named_arrays()[k], b.named_arrays()[k])
    plain = init_lstm("LSTM", SeededRng(5), hidden=4)
    assert not isinstance(plain, LstmPcParams)
    np.testing.assert_array_equal(plain.w_x, a.w_x)
    bound = np.sqrt(6 / (2 + 4))
    assert np.all(np.abs(a.w_x) <= bound)
