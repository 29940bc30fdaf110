"""Parameter containers and forward passes for the five architectures.

Feedforward nets (ANN, DNN) use sigmoid on every layer including the output.
ELM is a single random sigmoid hidden layer with a linear readout. LSTM and
LSTM-PC unroll one step per lag with input ``x_t = (T_lag, H_lag)`` and read
the last hidden state out through a linear layer.

Gate-stacked arrays use the order input, forget, cell, output; peephole rows
are ordered input, forget, output.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace

import numpy as np

from .core_math import ShapeError, SeededRng, sigmoid, uniform_matrix

GATES = ("i", "f", "c", "o")
PEEPHOLES = ("ci", "cf", "co")


class ModelKind(str, enum.Enum):
    ANN = "ANN"
    DNN = "DNN"
    ELM = "ELM"
    LSTM = "LSTM"
    LSTM_PC = "LSTM_PC"

    @property
    def rank(self) -> int:
        return list(ModelKind).index(self)

    @property
    def is_recurrent(self) -> bool:
        return self in (ModelKind.LSTM, ModelKind.LSTM_PC)

    @property
    def is_feedforward(self) -> bool:
        return self in (ModelKind.ANN, ModelKind.DNN)

    @classmethod
    def parse(cls, name) -> "ModelKind":
        if isinstance(name, ModelKind):
            return name
        key = str(name).strip().upper().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown model kind {name!r}") from None


class _ArrayParams:
    """Mixin giving named-array access used by gradients and SGD."""

    def named_arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)
                if isinstance(getattr(self, f.name), np.ndarray)}

    def with_arrays(self, arrays: dict[str, np.ndarray]):
        current = self.named_arrays()
        for name, a in arrays.items():
            if name not in current:
                raise ShapeError(f"unknown parameter {name!r}")
            if np.shape(a) != current[name].shape:
                raise ShapeError(f"{name}: shape {np.shape(a)} != {current[name].shape}")
        return replace(self, **{k: np.asarray(v, dtype=np.float64) for k, v in arrays.items()})


@dataclass(frozen=True, eq=False)
class FeedforwardParams(_ArrayParams):
    """Layers ``W_k`` (out x in) and ``b_k``; arrays are named ``W0, b0, W1, ...``."""

    kind: ModelKind
    layers: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __post_init__(self):
        prev = None
        for k, (w, b) in enumerate(self.layers):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ShapeError(f"layer {k}: weights {w.shape} vs biases {b.shape}")
            if prev is not None and w.shape[1] != prev:
                raise ShapeError(f"layer {k} expects {w.shape[1]} inputs, previous layer gives {prev}")
            prev = w.shape[0]
        if prev != 1:
            raise ShapeError("final layer must have one output node")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.layers[0][0].shape[1],) + tuple(w.shape[0] for w, _ in self.layers)

    @property
    def input_width(self) -> int:
        return self.sizes[0]

    def named_arrays(self):
        out = {}
        for k, (w, b) in enumerate(self.layers):
            out[f"W{k}"] = w
            out[f"b{k}"] = b
        return out

    def with_arrays(self, arrays):
        current = self.named_arrays()
        merged = dict(current)
        for name, a in arrays.items():
            if name not in current:
                raise ShapeError(f"unknown parameter {name!r}")
            if np.shape(a) != current[name].shape:
                raise ShapeError(f"{name}: shape {np.shape(a)} != {current[name].shape}")
            merged[name] = np.asarray(a, dtype=np.float64)
        layers = tuple((merged[f"W{k}"], merged[f"b{k}"]) for k in range(len(self.layers)))
        return FeedforwardParams(self.kind, layers)


@dataclass(frozen=True, eq=False)
class ElmParams(_ArrayParams):
    w: np.ndarray      # (n, d) frozen random input weights
    b: np.ndarray      # (n,)   frozen random biases
    alpha: np.ndarray  # (n, 1) fitted output weights

    @property
    def hidden_count(self) -> int:
        return self.w.shape[0]

    @property
    def input_width(self) -> int:
        return self.w.shape[1]


@dataclass(frozen=True, eq=False)
class LstmParams(_ArrayParams):
    w_x: np.ndarray    # (4, n_h, 2)
    w_h: np.ndarray    # (4, n_h, n_h)
    b: np.ndarray      # (4, n_h)
    w_out: np.ndarray  # (n_h,)
    b_out: np.ndarray  # (1,)

    def __post_init__(self):
        nh = self.w_x.shape[1]
        expected = {"w_x": (4, nh, 2), "w_h": (4, nh, nh), "b": (4, nh), "w_out": (nh,), "b_out": (1,)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"{name}: shape {getattr(self, name).shape}, expected {shape}")

    @property
    def kind(self) -> ModelKind:
        return ModelKind.LSTM

    @property
    def hidden_size(self) -> int:
        return self.w_x.shape[1]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(w_x?, w_h?, b_?)`` for gate i, f, c or o."""
        g = GATES.index(name)
        return self.w_x[g], self.w_h[g], self.b[g]


@dataclass(frozen=True, eq=False)
class LstmPcParams(LstmParams):
    w_peep: np.ndarray = None  # (3, n_h): w_ci, w_cf, w_co applied elementwise

    def __post_init__(self):
        super().__post_init__()
        if self.w_peep is None or self.w_peep.shape != (3, self.hidden_size):
            raise ShapeError(f"w_peep must have shape (3, {self.hidden_size})")

    @property
    def kind(self) -> ModelKind:
        return ModelKind.LSTM_PC

    @classmethod
    def from_lstm(cls, p: LstmParams, w_peep=None) -> "LstmPcParams":
        if w_peep is None:
            w_peep = np.zeros((3, p.hidden_size))
        return cls(p.w_x, p.w_h, p.b, p.w_out, p.b_out, np.asarray(w_peep, dtype=np.float64))


@dataclass(frozen=True)
class StepCache:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    c_bar: np.ndarray
    c: np.ndarray
    o: np.ndarray
    h: np.ndarray


def _glorot(rng: SeededRng, shape, fan_in: int, fan_out: int) -> np.ndarray:
    r = np.sqrt(6.0 / (fan_in + fan_out))
    rows = shape[0]
    cols = int(np.prod(shape[1:])) if len(shape) > 1 else 1
    return uniform_matrix(rng, rows, cols, -r, r).reshape(shape)


def init_feedforward(kind, input_width: int, rng: SeededRng, hidden: int = 3) -> FeedforwardParams:
    kind = ModelKind.parse(kind)
    depth = {ModelKind.ANN: 1, ModelKind.DNN: 2}[kind]
    sizes = [input_width] + [hidden] * depth + [1]
    layers = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        layers.append((_glorot(rng, (n_out, n_in), n_in, n_out), np.zeros(n_out)))
    return FeedforwardParams(kind, tuple(layers))


def init_lstm(kind, rng: SeededRng, hidden: int = 4) -> LstmParams:
    kind = ModelKind.parse(kind)
    nh = hidden
    w_x = np.stack([_glorot(rng, (nh, 2), 2, nh) for _ in GATES])
    w_h = np.stack([_glorot(rng, (nh, nh), nh, nh) for _ in GATES])
    w_out = _glorot(rng, (nh,), nh, 1)
    base = LstmParams(w_x, w_h, np.zeros((4, nh)), w_out, np.zeros(1))
    if kind is ModelKind.LSTM:
        return base
    # peepholes are a diagonal n_h x n_h map
    w_peep = np.stack([_glorot(rng, (nh,), nh, nh) for _ in PEEPHOLES])
    return LstmPcParams.from_lstm(base, w_peep)


def init_elm(input_width: int, hidden: int, rng: SeededRng) -> ElmParams:
    w = uniform_matrix(rng, hidden, input_width, -1.0, 1.0)
    b = uniform_matrix(rng, hidden, 1, -1.0, 1.0).ravel()
    return ElmParams(w, b, np.zeros((hidden, 1)))


def _check_vector(x, n: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise ShapeError(f"{what}: expected length {n}, got shape {x.shape}")
    return x


def feedforward_forward(params: FeedforwardParams, x):
    """Returns ``(yhat, activations)`` with activations[0] the input."""
    a = _check_vector(x, params.input_width, "input")
    acts = [a]
    for w, b in params.layers:
        a = sigmoid(w @ a + b)
        acts.append(a)
    return float(a[0]), acts


def elm_hidden(params: ElmParams, inputs) -> np.ndarray:
    """Hidden activation matrix G, one row per sample."""
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if x.shape[1] != params.input_width:
        raise ShapeError(f"input width {x.shape[1]} != {params.input_width}")
    return sigmoid(x @ params.w.T + params.b)


def elm_predict(params: ElmParams, x) -> float:
    x = _check_vector(x, params.input_width, "input")
    return float((elm_hidden(params, x[None, :]) @ params.alpha)[0, 0])


def _lstm_core(params: LstmParams, peep, x_t, h_prev, c_prev):
    nh = params.hidden_size
    x_t = _check_vector(x_t, 2, "x_t")
    h_prev = _check_vector(h_prev, nh, "h_prev")
    c_prev = _check_vector(c_prev, nh, "c_prev")
    pre = params.w_x @ x_t + params.w_h @ h_prev + params.b  # (4, nh)
    if peep is not None:
        pre_i = pre[0] + peep[0] * c_prev
        pre_f = pre[1] + peep[1] * c_prev
    else:
        pre_i, pre_f = pre[0], pre[1]
    i = sigmoid(pre_i)
    f = sigmoid(pre_f)
    c_bar = np.tanh(pre[2])
    c = f * c_prev + i * c_bar
    pre_o = pre[3] + peep[2] * c if peep is not None else pre[3]
    o = sigmoid(pre_o)
    h = o * np.tanh(c)
    return h, c, StepCache(x_t, h_prev, c_prev, i, f, c_bar, c, o, h)


def lstm_step(params: LstmParams, x_t, h_prev, c_prev):
    """One plain LSTM step; peephole weights, if present, are ignored."""
    return _lstm_core(params, None, x_t, h_prev, c_prev)


def lstm_pc_step(params: LstmPcParams, x_t, h_prev, c_prev):
    """One peephole step; the output gate sees the updated cell state."""
    return _lstm_core(params, params.w_peep, x_t, h_prev, c_prev)


def window_to_steps(window, lag_count: int) -> np.ndarray:
    """Reshape ``[T lags..., H lags...]`` into ``lag_count`` rows of ``(T, H)``."""
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (2 * lag_count,):
        raise ShapeError(f"window of shape {window.shape} does not match {lag_count} lags")
    return window.reshape(2, lag_count).T


def sequence_forward(params: LstmParams, window, spec):
    """Run the recurrent cell over the lag window from zero state."""
    steps = window_to_steps(window, spec.lag_count)
    step = lstm_pc_step if isinstance(params, LstmPcParams) else lstm_step
    h = np.zeros(params.hidden_size)
    c = np.zeros(params.hidden_size)
    caches = []
    for x_t in steps:
        h, c, cache = step(params, x_t, h, c)
        caches.append(cache)
    return float(params.w_out @ h + params.b_out[0]), caches


def predict(model, inputs, spec) -> np.ndarray:
    """Normalized predictions for every row of ``inputs``."""
    from .training import ElmEnsemble

    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if isinstance(model, ElmEnsemble):
        return model.predict_many(inputs)
    if isinstance(model, ElmParams):
        return (elm_hidden(model, inputs) @ model.alpha)[:, 0]
    if isinstance(model, FeedforwardParams):
        return np.array([feedforward_forward(model, x)[0] for x in inputs])
    if isinstance(model, LstmParams):
        return np.array([sequence_forward(model, x, spec)[0] for x in inputs])
    raise TypeError(f"cannot predict with {type(model).__name__}")
