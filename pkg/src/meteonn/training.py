"""Gradients, SGD and the closed-form ELM fit.

``backprop_feedforward`` and ``bptt`` are plain numpy reference
implementations. ``train_iterative`` runs the same per-sample updates through
numba kernels; the test suite checks both paths agree.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg

from .core_math import SeededRng, ShapeError, derive_seed
from .dataset import SampleSet
from .models import (
    ElmParams, FeedforwardParams, LstmParams, LstmPcParams, ModelKind,
    elm_hidden, feedforward_forward, init_elm, init_feedforward, init_lstm,
    sequence_forward, window_to_steps,
)

ANN_LR_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
LSTM_LR_GRID = (0.001, 0.003, 0.005, 0.007, 0.009)
EPOCH_GRID = (2500, 5000, 7500)
ELM_OPTIMALITY_TOL = 1e-6

GradientSet = dict  # parameter name -> gradient array, shape-matched to the model


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss
        self.completed = []  # checkpoints reached before divergence


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    epochs: int
    seed: int = 0
    epoch_scale: float = 1.0
    ff_hidden: int = 3
    lstm_hidden: int = 4

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or not self.epoch_scale > 0:
            raise ValueError("epochs and epoch_scale must be positive")

    @property
    def effective_epochs(self) -> int:
        return scaled_epochs(self.epochs, self.epoch_scale)


def scaled_epochs(epochs: int, scale: float) -> int:
    return max(1, int(math.floor(epochs * scale + 0.5)))


@dataclass
class LossHistory:
    epoch_loss: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.epoch_loss)

    @property
    def final(self) -> float:
        return self.epoch_loss[-1]


def mse_loss(yhat: float, y: float) -> float:
    return (yhat - y) ** 2


# ---------------------------------------------------------------- reference

def backprop_feedforward(params: FeedforwardParams, x, y: float) -> GradientSet:
    yhat, acts = feedforward_forward(params, x)
    grads = {}
    delta = np.array([2.0 * (yhat - y) * yhat * (1.0 - yhat)])
    for k in range(len(params.layers) - 1, -1, -1):
        w, _ = params.layers[k]
        a_prev = acts[k]
        grads[f"W{k}"] = np.outer(delta, a_prev)
        grads[f"b{k}"] = delta.copy()
        if k:
            delta = (w.T @ delta) * a_prev * (1.0 - a_prev)
    return {name: grads[name] for name in params.named_arrays()}


def bptt(model_kind, params: LstmParams, window, y: float, spec) -> GradientSet:
    """Exact gradient of the squared error through every unrolled step."""
    kind = ModelKind.parse(model_kind)
    if kind is ModelKind.LSTM_PC and not isinstance(params, LstmPcParams):
        raise ShapeError("LSTM_PC gradient needs LstmPcParams")
    peep = params.w_peep if kind is ModelKind.LSTM_PC else None
    if kind is ModelKind.LSTM and isinstance(params, LstmPcParams):
        params = LstmParams(params.w_x, params.w_h, params.b, params.w_out, params.b_out)
    yhat, caches = sequence_forward(params, window, spec)

    nh = params.hidden_size
    g_wx = np.zeros_like(params.w_x)
    g_wh = np.zeros_like(params.w_h)
    g_b = np.zeros_like(params.b)
    g_peep = np.zeros((3, nh))
    dy = 2.0 * (yhat - y)
    h_last = caches[-1].h
    grads = {"w_out": dy * h_last, "b_out": np.array([dy])}

    dh = dy * params.w_out
    dc_next = np.zeros(nh)
    for cache in reversed(caches):
        tc = np.tanh(cache.c)
        da_o = dh * tc * cache.o * (1.0 - cache.o)
        dc = dc_next + dh * cache.o * (1.0 - tc ** 2)
        if peep is not None:
            dc = dc + da_o * peep[2]
        da_i = dc * cache.c_bar * cache.i * (1.0 - cache.i)
        da_f = dc * cache.c_prev * cache.f * (1.0 - cache.f)
        da_c = dc * cache.i * (1.0 - cache.c_bar ** 2)
        da = np.stack([da_i, da_f, da_c, da_o])
        g_wx += da[:, :, None] * cache.x[None, None, :]
        g_wh += da[:, :, None] * cache.h_prev[None, None, :]
        g_b += da
        dh = np.einsum("gkj,gk->j", params.w_h, da)
        dc_next = dc * cache.f
        if peep is not None:
            g_peep[0] += da_i * cache.c_prev
            g_peep[1] += da_f * cache.c_prev
            g_peep[2] += da_o * cache.c
            dc_next = dc_next + da_i * peep[0] + da_f * peep[1]
    grads.update(w_x=g_wx, w_h=g_wh, b=g_b)
    if peep is not None:
        grads["w_peep"] = g_peep
    return {name: grads[name] for name in params.named_arrays()}


def sgd_update(params, grads: GradientSet, lr: float):
    arrays = params.named_arrays()
    if set(grads) != set(arrays):
        raise ShapeError(f"gradient names {sorted(grads)} != parameter names {sorted(arrays)}")
    new = {}
    for name, w in arrays.items():
        g = np.asarray(grads[name])
        if g.shape != w.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {w.shape}")
        new[name] = w - lr * g
    return params.with_arrays(new)


# ------------------------------------------------------------------ kernels

@numba.njit(cache=True)
def _sig(a):
    if a > 500.0:
        a = 500.0
    elif a < -500.0:
        a = -500.0
    return 1.0 / (1.0 + math.exp(-a))


@numba.njit(cache=True)
def _ff_epoch(theta, sizes, X, y, lr):
    """One in-place per-sample SGD pass; returns the mean pre-update loss."""
    nl = sizes.size - 1
    width = 0
    for k in range(nl + 1):
        width = max(width, sizes[k])
    acts = np.zeros((nl + 1, width))
    delta = np.zeros(width)
    nxt = np.zeros(width)
    total = 0.0
    for s in range(X.shape[0]):
        for i in range(sizes[0]):
            acts[0, i] = X[s, i]
        off = 0
        for k in range(nl):
            nin = sizes[k]
            nout = sizes[k + 1]
            for j in range(nout):
                a = theta[off + nout * nin + j]
                for i in range(nin):
                    a += theta[off + j * nin + i] * acts[k, i]
                acts[k + 1, j] = _sig(a)
            off += nout * nin + nout
        yhat = acts[nl, 0]
        err = yhat - y[s]
        total += err * err
        delta[0] = 2.0 * err * yhat * (1.0 - yhat)
        end = off
        for k in range(nl - 1, -1, -1):
            nin = sizes[k]
            nout = sizes[k + 1]
            off = end - (nout * nin + nout)
            if k > 0:
                for i in range(nin):
                    acc = 0.0
                    for j in range(nout):
                        acc += theta[off + j * nin + i] * delta[j]
                    a = acts[k, i]
                    nxt[i] = acc * a * (1.0 - a)
            for j in range(nout):
                for i in range(nin):
                    theta[off + j * nin + i] -= lr * (delta[j] * acts[k, i])
                theta[off + nout * nin + j] -= lr * delta[j]
            if k > 0:
                for i in range(nin):
                    delta[i] = nxt[i]
            end = off
    return total / X.shape[0]


@numba.njit(cache=True)
def _lstm_epoch(w_x, w_h, b, w_peep, w_out, b_out, use_peep, X, y, lr):
    """One in-place per-sample SGD pass over windows X of shape (S, L, 2)."""
    S, L, _ = X.shape
    nh = w_x.shape[1]
    hs = np.zeros((L + 1, nh))
    cs = np.zeros((L + 1, nh))
    gi = np.zeros((L, nh))
    gf = np.zeros((L, nh))
    gc = np.zeros((L, nh))
    go = np.zeros((L, nh))
    d_wx = np.zeros_like(w_x)
    d_wh = np.zeros_like(w_h)
    d_b = np.zeros_like(b)
    d_peep = np.zeros_like(w_peep)
    d_out = np.zeros(nh)
    dh = np.zeros(nh)
    dh_prev = np.zeros(nh)
    dc_next = np.zeros(nh)
    da = np.zeros((4, nh))
    pre = np.zeros((4, nh))
    total = 0.0
    for s in range(S):
        # forward
        for t in range(L):
            x0 = X[s, t, 0]
            x1 = X[s, t, 1]
            for g in range(4):
                for k in range(nh):
                    a = b[g, k] + w_x[g, k, 0] * x0 + w_x[g, k, 1] * x1
                    for j in range(nh):
                        a += w_h[g, k, j] * hs[t, j]
                    pre[g, k] = a
            for k in range(nh):
                cp = cs[t, k]
                ai = pre[0, k]
                af = pre[1, k]
                if use_peep:
                    ai += w_peep[0, k] * cp
                    af += w_peep[1, k] * cp
                iv = _sig(ai)
                fv = _sig(af)
                cb = math.tanh(pre[2, k])
                c = fv * cp + iv * cb
                ao = pre[3, k]
                if use_peep:
                    ao += w_peep[2, k] * c
                ov = _sig(ao)
                gi[t, k] = iv
                gf[t, k] = fv
                gc[t, k] = cb
                go[t, k] = ov
                cs[t + 1, k] = c
                hs[t + 1, k] = ov * math.tanh(c)
        yhat = b_out[0]
        for k in range(nh):
            yhat += w_out[k] * hs[L, k]
        err = yhat - y[s]
        total += err * err
        # backward
        dy = 2.0 * err
        d_wx[:] = 0.0
        d_wh[:] = 0.0
        d_b[:] = 0.0
        d_peep[:] = 0.0
        for k in range(nh):
            d_out[k] = dy * hs[L, k]
            dh[k] = dy * w_out[k]
            dc_next[k] = 0.0
        for t in range(L - 1, -1, -1):
            for k in range(nh):
                c = cs[t + 1, k]
                cp = cs[t, k]
                tc = math.tanh(c)
                ov = go[t, k]
                iv = gi[t, k]
                fv = gf[t, k]
                cb = gc[t, k]
                dao = dh[k] * tc * ov * (1.0 - ov)
                dc = dc_next[k] + dh[k] * ov * (1.0 - tc * tc)
                if use_peep:
                    dc += dao * w_peep[2, k]
                dai = dc * cb * iv * (1.0 - iv)
                daf = dc * cp * fv * (1.0 - fv)
                dac = dc * iv * (1.0 - cb * cb)
                da[0, k] = dai
                da[1, k] = daf
                da[2, k] = dac
                da[3, k] = dao
                dcn = dc * fv
                if use_peep:
                    d_peep[0, k] += dai * cp
                    d_peep[1, k] += daf * cp
                    d_peep[2, k] += dao * c
                    dcn += dai * w_peep[0, k] + daf * w_peep[1, k]
                dc_next[k] = dcn
            x0 = X[s, t, 0]
            x1 = X[s, t, 1]
            for j in range(nh):
                dh_prev[j] = 0.0
            for g in range(4):
                for k in range(nh):
                    d = da[g, k]
                    d_b[g, k] += d
                    d_wx[g, k, 0] += d * x0
                    d_wx[g, k, 1] += d * x1
                    for j in range(nh):
                        d_wh[g, k, j] += d * hs[t, j]
                        dh_prev[j] += w_h[g, k, j] * d
            for j in range(nh):
                dh[j] = dh_prev[j]
        # update
        for g in range(4):
            for k in range(nh):
                b[g, k] -= lr * d_b[g, k]
                w_x[g, k, 0] -= lr * d_wx[g, k, 0]
                w_x[g, k, 1] -= lr * d_wx[g, k, 1]
                for j in range(nh):
                    w_h[g, k, j] -= lr * d_wh[g, k, j]
        if use_peep:
            for r in range(3):
                for k in range(nh):
                    w_peep[r, k] -= lr * d_peep[r, k]
        for k in range(nh):
            w_out[k] -= lr * d_out[k]
        b_out[0] -= lr * dy
    return total / S


# ----------------------------------------------------------------- training

def init_params(kind, input_width: int, config: TrainConfig):
    kind = ModelKind.parse(kind)
    rng = SeededRng(config.seed)
    if kind.is_feedforward:
        return init_feedforward(kind, input_width, rng, config.ff_hidden)
    if kind.is_recurrent:
        return init_lstm(kind, rng, config.lstm_hidden)
    raise ValueError("ELM is fitted with elm_fit, not iteratively")


class _FeedforwardRunner:
    def __init__(self, params: FeedforwardParams, samples: SampleSet):
        self.kind = params.kind
        self.shapes = [(w.shape, b.shape) for w, b in params.layers]
        self.theta = np.concatenate([np.concatenate([w.ravel(), b]) for w, b in params.layers])
        self.sizes = np.array(params.sizes, dtype=np.int64)
        self.X = np.ascontiguousarray(samples.inputs)
        self.y = np.ascontiguousarray(samples.targets)

    def epoch(self, lr):
        return _ff_epoch(self.theta, self.sizes, self.X, self.y, lr)

    def params(self) -> FeedforwardParams:
        layers, off = [], 0
        for ws, bs in self.shapes:
            nw = ws[0] * ws[1]
            w = self.theta[off:off + nw].reshape(ws).copy()
            b = self.theta[off + nw:off + nw + bs[0]].copy()
            layers.append((w, b))
            off += nw + bs[0]
        return FeedforwardParams(self.kind, tuple(layers))


class _LstmRunner:
    def __init__(self, params: LstmParams, samples: SampleSet):
        self.peephole = isinstance(params, LstmPcParams)
        self.arrays = {k: v.copy() for k, v in params.named_arrays().items()}
        if not self.peephole:
            self.arrays["w_peep"] = np.zeros((3, params.hidden_size))
        L = samples.spec.lag_count
        self.X = np.ascontiguousarray(samples.inputs.reshape(-1, 2, L).transpose(0, 2, 1))
        self.y = np.ascontiguousarray(samples.targets)

    def epoch(self, lr):
        a = self.arrays
        return _lstm_epoch(a["w_x"], a["w_h"], a["b"], a["w_peep"], a["w_out"], a["b_out"],
                           self.peephole, self.X, self.y, lr)

    def params(self) -> LstmParams:
        a = {k: v.copy() for k, v in self.arrays.items()}
        base = LstmParams(a["w_x"], a["w_h"], a["b"], a["w_out"], a["b_out"])
        return LstmPcParams.from_lstm(base, a["w_peep"]) if self.peephole else base


@dataclass
class Checkpoint:
    epochs: int
    params: object
    history: LossHistory
    seconds: float


def train_checkpoints(model_kind, samples: SampleSet, config: TrainConfig, checkpoints) -> list[Checkpoint]:
    """Train once for ``max(checkpoints)`` epochs, snapshotting at each checkpoint.

    Checkpoint counts are actual epochs (already scaled).
    """
    kind = ModelKind.parse(model_kind)
    if len(samples) == 0:
        raise ValueError("cannot train on an empty sample set")
    marks = sorted(set(int(c) for c in checkpoints))
    if not marks or marks[0] < 1:
        raise ValueError("checkpoints must be positive epoch counts")
    params = init_params(kind, samples.spec.input_width, config)
    runner = _FeedforwardRunner(params, samples) if kind.is_feedforward else _LstmRunner(params, samples)
    history = LossHistory()
    out = []
    t0 = time.perf_counter()
    for epoch in range(1, marks[-1] + 1):
        loss = runner.epoch(config.learning_rate)
        if not math.isfinite(loss) or not np.all(np.isfinite(runner.theta if kind.is_feedforward
                                                             else runner.arrays["w_x"])):
            err = DivergenceError(epoch, loss)
            err.completed = out
            raise err
        history.epoch_loss.append(float(loss))
        if epoch in marks:
            out.append(Checkpoint(epoch, runner.params(), LossHistory(list(history.epoch_loss)),
                                  time.perf_counter() - t0))
    return out


def train_iterative(model_kind, samples: SampleSet, config: TrainConfig):
    """Per-sample SGD in chronological order; returns ``(params, LossHistory)``.

    The history holds, per epoch, the mean squared error of each sample taken
    just before its update.
    """
    (cp,) = train_checkpoints(model_kind, samples, config, [config.effective_epochs])
    return cp.params, cp.history


def train_reference(model_kind, samples: SampleSet, config: TrainConfig):
    """Slow numpy-only equivalent of ``train_iterative`` (for cross-checking)."""
    kind = ModelKind.parse(model_kind)
    params = init_params(kind, samples.spec.input_width, config)
    history = LossHistory()
    for _ in range(config.effective_epochs):
        total = 0.0
        for x, y in zip(samples.inputs, samples.targets):
            if kind.is_feedforward:
                yhat = feedforward_forward(params, x)[0]
                grads = backprop_feedforward(params, x, y)
            else:
                yhat = sequence_forward(params, x, samples.spec)[0]
                grads = bptt(kind, params, x, y, samples.spec)
            total += mse_loss(yhat, y)
            params = sgd_update(params, grads, config.learning_rate)
        history.epoch_loss.append(total / len(samples))
    return params, history


# ---------------------------------------------------------------------- ELM

def elm_ridge(G: np.ndarray) -> float:
    n = G.shape[1]
    return 1e-8 * float(np.einsum("ij,ij->", G, G)) / n


def elm_solve(G, C, tol: float = ELM_OPTIMALITY_TOL, max_refine: int = 200) -> np.ndarray:
    """Output weights minimizing ``||G a - C||_F``.

    Solves the ridge-stabilized normal equations
    ``(G^T G + lam I) a = G^T C`` with ``lam = 1e-8 trace(G^T G) / n``, then
    refines against the unregularized residual (iterated Tikhonov) until
    ``||G^T (G a - C)||_inf <= tol * ||G^T C||_inf``. Each refinement reuses
    the same Cholesky factor; near-null directions stay damped.
    """
    G = np.asarray(G, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64).reshape(G.shape[0], -1)
    n = G.shape[1]
    lam = elm_ridge(G)
    rhs = G.T @ C
    scale = np.max(np.abs(rhs))
    if lam == 0.0 or scale == 0.0:
        return np.zeros((n, C.shape[1]))
    factor = scipy.linalg.cho_factor(G.T @ G + lam * np.eye(n))
    alpha = scipy.linalg.cho_solve(factor, rhs)
    prev = np.inf
    for _ in range(max_refine):
        grad = G.T @ (C - G @ alpha)
        gmax = np.max(np.abs(grad))
        # past tol (with rounding headroom), stop once refinement stops paying off
        if gmax <= 1e-13 * scale or (gmax <= 0.5 * tol * scale and gmax > 0.5 * prev):
            break
        prev = gmax
        alpha = alpha + scipy.linalg.cho_solve(factor, grad)
    return alpha


def elm_fit_arrays(inputs, targets, n_hidden: int, seed: int) -> ElmParams:
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if inputs.shape[0] == 0:
        raise ValueError("cannot fit ELM on an empty sample set")
    if n_hidden < 1:
        raise ValueError("n_hidden must be >= 1")
    params = init_elm(inputs.shape[1], n_hidden, SeededRng(seed))
    G = elm_hidden(params, inputs)
    return params.with_arrays({"alpha": elm_solve(G, targets)})


def elm_fit(samples: SampleSet, n_hidden: int = 20, seed: int = 0) -> ElmParams:
    return elm_fit_arrays(samples.inputs, samples.targets, n_hidden, seed)


@dataclass(frozen=True)
class ElmEnsemble:
    members: tuple[ElmParams, ...]

    def predict_many(self, inputs) -> np.ndarray:
        preds = [(elm_hidden(m, inputs) @ m.alpha)[:, 0] for m in self.members]
        return np.mean(preds, axis=0)

    def predict(self, x) -> float:
        return float(self.predict_many(np.asarray(x, dtype=np.float64)[None, :])[0])


def elm_member_seeds(base_seed: int, epochs=EPOCH_GRID) -> tuple[int, ...]:
    """One seed per epoch setting; ELM has no epochs, so members are random restarts."""
    return tuple(derive_seed(base_seed, "ELM", e) for e in epochs)


def elm_ensemble_fit(samples: SampleSet, n_hidden: int, seeds) -> ElmEnsemble:
    return ElmEnsemble(tuple(elm_fit(samples, n_hidden, s) for s in seeds))


def elm_ensemble_predict(samples: SampleSet, n_hidden: int, base_seed: int, x) -> float:
    return elm_ensemble_fit(samples, n_hidden, elm_member_seeds(base_seed)).predict(x)
