"""Univariate LSTM forecaster with explicit backpropagation through time.

A single recurrent layer reads a fixed-length window of past values and a
scalar linear head predicts the next one.  Everything runs in double
precision on numpy; training is plain minibatch SGD with gradient-norm
clipping, deterministic under a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .errors import InsufficientDataError, TrainingDivergedError


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-2
    epochs: int = 200
    window: int = 30
    train_fraction: float = 0.7
    seed: int = 0
    clip: float = 5.0
    hidden_size: int = 32
    batch_size: int = 256


class LstmModel:
    """Gate parameters plus output projection; gates packed as [i, f, o, g]."""

    def __init__(self, hidden_size, window, rng):
        H = hidden_size
        self.hidden_size = H
        self.window = window
        u = lambda *shape: rng.uniform(-0.08, 0.08, size=shape)
        self.Wx = u(4 * H)
        self.Wh = u(4 * H, H)
        self.b = u(4 * H)
        self.b[H:2 * H] = 1.0  # forget-gate bias, stabilizes early training
        self.w_out = u(H)
        self.b_out = float(rng.uniform(-0.08, 0.08))

    def params(self):
        return [("Wx", self.Wx), ("Wh", self.Wh), ("b", self.b),
                ("w_out", self.w_out), ("b_out", self.b_out)]


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def make_windows(series, window):
    """Stride-1 sliding (input window, next value) pairs."""
    series = np.asarray(series, dtype=float)
    if series.size <= window:
        raise InsufficientDataError(
            f"series length {series.size} too short for window {window}"
        )
    X = np.lib.stride_tricks.sliding_window_view(series[:-1], window)
    y = series[window:]
    return X.copy(), y.copy()


def _forward_batch(model, X, keep_trace=False):
    """Hidden trajectory over a (B, W) batch; returns predictions and trace."""
    B, W = X.shape
    H = model.hidden_size
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    trace = []
    for t in range(W):
        a = X[:, t:t + 1] * model.Wx[None, :] + h @ model.Wh.T + model.b[None, :]
        i = _sigmoid(a[:, :H])
        f = _sigmoid(a[:, H:2 * H])
        o = _sigmoid(a[:, 2 * H:3 * H])
        g = np.tanh(a[:, 3 * H:])
        c_prev = c
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h_prev = h
        h = o * tc
        if keep_trace:
            trace.append((i, f, o, g, c_prev, c, tc, h_prev))
    y = h @ model.w_out + model.b_out
    return y, h, trace


def forward(model, window_values):
    """Deterministic scalar prediction for one input window."""
    x = np.asarray(window_values, dtype=float)
    if x.size != model.window:
        raise ValueError(f"window length {x.size} != model window {model.window}")
    y, _, _ = _forward_batch(model, x[None, :])
    return float(y[0])


def _backward_batch(model, X, targets):
    """Mean-squared-error loss and analytic gradients over one batch."""
    B, W = X.shape
    H = model.hidden_size
    y, h_last, trace = _forward_batch(model, X, keep_trace=True)
    err = y - targets
    loss = 0.5 * float(np.mean(err ** 2))

    gWx = np.zeros_like(model.Wx)
    gWh = np.zeros_like(model.Wh)
    gb = np.zeros_like(model.b)
    gw_out = (err[:, None] * h_last).mean(axis=0)
    gb_out = float(err.mean())

    dh = (err[:, None] / B) * model.w_out[None, :]
    dc = np.zeros((B, H))
    for t in range(W - 1, -1, -1):
        i, f, o, g, c_prev, c, tc, h_prev = trace[t]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc ** 2)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        da = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                do * o * (1.0 - o),
                dg * (1.0 - g ** 2),
            ],
            axis=1,
        )
        gWx += da.T @ X[:, t]
        gWh += da.T @ h_prev
        gb += da.sum(axis=0)
        dh = da @ model.Wh
        dc = dc * f
    grads = {"Wx": gWx, "Wh": gWh, "b": gb, "w_out": gw_out, "b_out": gb_out}
    return loss, grads


def _clip_grads(grads, threshold):
    total = 0.0
    for v in grads.values():
        total += float(np.sum(np.square(v)))
    norm = np.sqrt(total)
    if norm > threshold:
        scale = threshold / norm
        for k, v in grads.items():
            grads[k] = v * scale
    return grads


def _apply(model, grads, lr):
    model.Wx -= lr * grads["Wx"]
    model.Wh -= lr * grads["Wh"]
    model.b -= lr * grads["b"]
    model.w_out -= lr * grads["w_out"]
    model.b_out -= lr * grads["b_out"]


def train(series, config, on_epoch=None):
    """Fit on the chronological first ``train_fraction`` of each series.

    ``series`` is one sequence or a list of sequences pooled together; windows
    never cross a sequence boundary or the train/holdout split.  Returns the
    trained model and the one-step-ahead RMSE on the holdout windows.
    ``on_epoch``, when given, receives ``(epoch, mean_loss)`` after each epoch.
    """
    if not isinstance(series, (list, tuple)) or np.ndim(series[0]) == 0:
        series = [series]
    W = config.window
    train_X, train_y, hold_X, hold_y = [], [], [], []
    for s in series:
        s = np.asarray(s, dtype=float)
        if s.size <= W:
            continue
        X, y = make_windows(s, W)
        split = int(np.floor(config.train_fraction * s.size))
        # Target index of window j is W + j; the split is on target indexes.
        cut = max(0, split - W)
        train_X.append(X[:cut])
        train_y.append(y[:cut])
        hold_X.append(X[cut:])
        hold_y.append(y[cut:])
    train_X = np.concatenate(train_X) if train_X else np.empty((0, W))
    train_y = np.concatenate(train_y) if train_y else np.empty((0,))
    hold_X = np.concatenate(hold_X) if hold_X else np.empty((0, W))
    hold_y = np.concatenate(hold_y) if hold_y else np.empty((0,))
    if train_X.shape[0] < 1 or hold_X.shape[0] < 1:
        raise InsufficientDataError("need at least one training and one holdout window")

    rng = np.random.default_rng(config.seed)
    model = LstmModel(config.hidden_size, W, rng)
    n = train_X.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = _backward_batch(model, train_X[idx], train_y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            grads = _clip_grads(grads, config.clip)
            _apply(model, grads, config.learning_rate)
            epoch_loss += loss * idx.size
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(epoch)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss / n)

    preds, _, _ = _forward_batch(model, hold_X)
    rmse = float(np.sqrt(np.mean((preds - hold_y) ** 2)))
    return model, rmse


def gradient_check(model, X, targets, step=1e-5, floor=1e-6):
    """Max relative error of analytic gradients vs central finite differences.

    ``floor`` guards the denominator: below it, central differences are
    dominated by floating-point cancellation (about eps * loss / step) and a
    relative comparison would measure roundoff, not gradient correctness.
    """
    _, grads = _backward_batch(model, X, targets)
    worst = 0.0
    for name, value in model.params():
        analytic = grads[name]
        if np.isscalar(value) or np.ndim(value) == 0:
            num = _fd_scalar(model, X, targets, name, step)
            worst = max(worst, _rel_err(analytic, num, floor))
            continue
        flat = value.reshape(-1)
        aflat = np.asarray(analytic).reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            lp, _ = _loss_only(model, X, targets)
            flat[j] = orig - step
            lm, _ = _loss_only(model, X, targets)
            flat[j] = orig
            num = (lp - lm) / (2.0 * step)
            worst = max(worst, _rel_err(aflat[j], num, floor))
    return worst


def _loss_only(model, X, targets):
    y, _, _ = _forward_batch(model, X)
    err = y - targets
    return 0.5 * float(np.mean(err ** 2)), y


def _fd_scalar(model, X, targets, name, step):
    orig = getattr(model, name)
    setattr(model, name, orig + step)
    lp, _ = _loss_only(model, X, targets)
    setattr(model, name, orig - step)
    lm, _ = _loss_only(model, X, targets)
    setattr(model, name, orig)
    return (lp - lm) / (2.0 * step)


def _rel_err(a, b, floor):
    return abs(a - b) / max(abs(a), abs(b), floor)


@dataclass
class ForecastResult:
    values: list  # predicted points only
    capped: bool


def forecast(model, seed_series, stop, horizon_cap=500):
    """Closed-loop roll-forward until ``stop`` fires on the extended series.

    ``stop`` receives the full extended series (seed plus predictions so far)
    after each step.  Hitting ``horizon_cap`` without a stop flags the result
    as capped.
    """
    seed_series = [float(v) for v in seed_series]
    if len(seed_series) < model.window:
        raise InsufficientDataError(
            f"seed length {len(seed_series)} < model window {model.window}"
        )
    extended = list(seed_series)
    predicted = []
    for _ in range(horizon_cap):
        nxt = forward(model, extended[-model.window:])
        extended.append(nxt)
        predicted.append(nxt)
        if stop(extended):
            return ForecastResult(values=predicted, capped=False)
    return ForecastResult(values=predicted, capped=True)


def save_model(model, config, path):
    payload = {
        "format": "aoipm-lstm-v1",
        "hidden_size": model.hidden_size,
        "window": model.window,
        "config": asdict(config),
        "Wx": model.Wx.tolist(),
        "Wh": model.Wh.tolist(),
        "b": model.b.tolist(),
        "w_out": model.w_out.tolist(),
        "b_out": model.b_out,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_model(path):
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != "aoipm-lstm-v1":
        raise ValueError("not an aoipm LSTM model file")
    config = TrainConfig(**payload["config"])
    model = LstmModel.__new__(LstmModel)
    model.hidden_size = payload["hidden_size"]
    model.window = payload["window"]
    model.Wx = np.array(payload["Wx"], dtype=float)
    model.Wh = np.array(payload["Wh"], dtype=float)
    model.b = np.array(payload["b"], dtype=float)
    model.w_out = np.array(payload["w_out"], dtype=float)
    model.b_out = float(payload["b_out"])
    return model, config
