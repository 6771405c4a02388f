"""Linear and MLP forecasters: the reward predictor and the TSF models.

A forecast window is a ``(C, h)`` matrix whose row 0 is the target channel and
whose other rows are auxiliary inputs such as a trend. Batches are
``(B, C, h)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import DataError, LabeledSeries, RunConfig, TooShort, as_rng, atomic_write_text
from .nn import AdamState, Mlp, ShapeMismatch, adam_step, mlp_backward, mlp_forward

KINDS = ("nlinear", "dlinear", "mlp")


class SeriesTooShort(TooShort):
    pass


@dataclass
class Forecaster:
    kind: str
    channels: int
    h: int
    p: int
    nets: list
    kernel: int = 25

    @classmethod
    def create(cls, kind, channels, h, p, rng=None, hidden=64, kernel=25) -> "Forecaster":
        """Fresh model.

        Linear maps start at zero except DLinear's target rows, which start at
        ``1/h`` ("repeat the mean"). Auxiliary-channel weights always start at
        zero, so an added trend channel cannot change the initial forecast.
        """
        kind = kind.lower()
        if kind not in KINDS:
            raise DataError(f"unknown forecaster kind {kind!r}")
        width = channels * h
        if kind == "nlinear":
            nets = [Mlp.zeros([width, p])]
        elif kind == "dlinear":
            nets = [Mlp.zeros([width, p]), Mlp.zeros([width, p])]
            for net in nets:
                net.weights[0][:, :h] = 1.0 / h
        else:
            net = Mlp.init([width, hidden, p], as_rng(rng).split("forecaster-init"), out_scale=0.1)
            net.weights[0][:, h:] = 0.0
            nets = [net]
        return cls(kind, int(channels), int(h), int(p), nets, int(kernel))

    def copy(self) -> "Forecaster":
        return Forecaster(self.kind, self.channels, self.h, self.p, [n.copy() for n in self.nets], self.kernel)

    @property
    def params(self):
        return [q for n in self.nets for q in n.params]

    def predict(self, window):
        return predict(self, window)

    def to_dict(self):
        return {
            "kind": self.kind,
            "channels": self.channels,
            "h": self.h,
            "p": self.p,
            "kernel": self.kernel,
            "nets": [n.to_dict() for n in self.nets],
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["kind"], doc["channels"], doc["h"], doc["p"], [Mlp.from_dict(n) for n in doc["nets"]], doc.get("kernel", 25))

    def save(self, path):
        atomic_write_text(path, json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _check_batch(model: Forecaster, windows):
    x = np.asarray(windows, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != (model.channels, model.h):
        raise ShapeMismatch(f"window shape {np.shape(windows)} does not match ({model.channels}, {model.h})")
    return x, single


def moving_average_rows(x, kernel: int):
    """Centred moving average along the last axis with edge replication."""
    left = (kernel - 1) // 2
    pad = [(0, 0)] * (x.ndim - 1) + [(left, kernel - 1 - left)]
    padded = np.pad(x, pad, mode="edge")
    return sliding_window_view(padded, kernel, axis=-1).mean(axis=-1)


def decompose(x, kernel: int):
    """Split ``x`` into moving-average trend and remainder with ``trend + remainder == x``."""
    trend = moving_average_rows(x, kernel)
    remainder = x - trend
    # recompute the trend from the remainder so the sum reproduces x bit-for-bit
    trend = x - remainder
    return trend, remainder


def _inputs(model: Forecaster, x):
    """Network inputs for a batch plus what is needed to finish the forecast."""
    if model.kind in ("nlinear", "mlp"):
        last = x[:, 0, -1]
        flat = (x - last[:, None, None]).reshape(len(x), -1)
        return [flat], last
    trend, rem = decompose(x[:, 0, :], model.kernel)
    aux = x[:, 1:, :].reshape(len(x), -1)
    return [np.concatenate([trend, aux], axis=1), np.concatenate([rem, aux], axis=1)], None


def _forward(model: Forecaster, x):
    inputs, last = _inputs(model, x)
    outs, caches = [], []
    for net, inp in zip(model.nets, inputs):
        o, c = mlp_forward(net, inp)
        outs.append(o)
        caches.append(c)
    y = sum(outs)
    if last is not None:
        y = y + last[:, None]
    return y, caches


def predict(model: Forecaster, windows):
    """Forecast ``p`` steps for one ``(C, h)`` window or a ``(B, C, h)`` batch."""
    x, single = _check_batch(model, windows)
    y, _ = _forward(model, x)
    return y[0] if single else y


def nlinear_predict(model: Forecaster, window):
    if model.kind != "nlinear":
        raise DataError("model is not an NLinear-style forecaster")
    return predict(model, window)


def dlinear_predict(model: Forecaster, window):
    if model.kind != "dlinear":
        raise DataError("model is not a DLinear-style forecaster")
    return predict(model, window)


def make_windows(channels, h: int, p: int, start: int = 0, stop: int | None = None, target_start: int | None = None):
    """All sliding ``(inputs, targets)`` pairs with the whole window inside ``[start, stop)``.

    ``channels`` is ``(C, N)`` with the target in row 0. ``target_start``
    additionally requires the forecast targets to begin at or after that index.
    """
    channels = np.atleast_2d(np.asarray(channels, dtype=np.float64))
    stop = channels.shape[1] if stop is None else stop
    first = start if target_start is None else max(start, target_start - h)
    starts = np.arange(first, stop - h - p + 1)
    if starts.size == 0:
        raise SeriesTooShort(f"range [{start}, {stop}) holds no window of length {h + p}")
    idx = starts[:, None] + np.arange(h)
    X = channels[:, idx].transpose(1, 0, 2)
    Y = channels[0][starts[:, None] + h + np.arange(p)]
    return X, Y, starts


def mse_loss(model: Forecaster, X, Y) -> float:
    return float(np.mean((predict(model, X) - Y) ** 2))


def fit_windows(model: Forecaster, X, Y, epochs: int, lr: float, rng, batch_size: int = 32, states=None):
    """Adam on mean squared error over pre-built windows.

    Returns the full-set training loss before training and after each epoch.
    Pass ``states`` (one AdamState per net) to continue an earlier run.
    """
    rng = as_rng(rng)
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if states is None:
        states = [AdamState.for_model(n) for n in model.nets]
    curve = [mse_loss(model, X, Y)]
    for _ in range(epochs):
        order = rng.permutation(len(X))
        for lo in range(0, len(X), batch_size):
            idx = order[lo : lo + batch_size]
            y_hat, caches = _forward(model, X[idx])
            g = 2.0 * (y_hat - Y[idx]) / y_hat.size
            for net, cache, state in zip(model.nets, caches, states):
                grads, _ = mlp_backward(net, cache, g)
                adam_step(net, grads, state, lr)
        curve.append(mse_loss(model, X, Y))
    return np.asarray(curve)


def train_forecaster(
    model: Forecaster,
    series: LabeledSeries,
    trend_channel=None,
    epochs: int = 15,
    lr: float = 1e-3,
    rng=None,
    batch_size: int = 32,
    stop: int | None = None,
):
    """Fit on sliding windows of ``series[:stop]``; returns the loss curve.

    ``trend_channel`` is a full-length array fed as the second channel.
    """
    target = series.target[:stop]
    if target.size < model.h + model.p + 1:
        raise SeriesTooShort(f"need at least {model.h + model.p + 1} points, got {target.size}")
    rows = [target]
    if model.channels == 2:
        if trend_channel is None:
            raise DataError("two-channel model needs a trend channel")
        rows.append(np.asarray(trend_channel, dtype=np.float64)[: target.size])
    elif model.channels != 1:
        raise DataError("only one- and two-channel forecasters are supported")
    X, Y, _ = make_windows(np.vstack(rows), model.h, model.p)
    return fit_windows(model, X, Y, epochs, lr, rng, batch_size)


PHI_TRACE_DENSITY = 0.3
PHI_TRACES_PER_WINDOW = 4


def phi_training_windows(target, cfg: RunConfig, rng, density: float = PHI_TRACE_DENSITY, traces: int = PHI_TRACES_PER_WINDOW):
    """Windows whose trend channel interpolates random Bernoulli action traces."""
    from .dtf.trend import interpolate_trend

    X1, Y, _ = make_windows(target[None, :], cfg.h, cfg.p)
    xs, ys = [], []
    for _ in range(traces):
        acts = (rng.random((len(X1), cfg.h)) < density).astype(np.int64)
        trend = np.stack([interpolate_trend(w, a) for w, a in zip(X1[:, 0, :], acts)])
        xs.append(np.stack([X1[:, 0, :], trend], axis=1))
        ys.append(Y)
    return np.concatenate(xs), np.concatenate(ys)


def phi_pretrain(series: LabeledSeries, cfg: RunConfig, rng=None, kind: str = "nlinear", stop: int | None = None) -> Forecaster:
    """Train the frozen reward predictor on raw + random-trace trend windows."""
    rng = as_rng(cfg.seed if rng is None else rng)
    target = series.target[:stop]
    if target.size < cfg.h + cfg.p + 1:
        raise SeriesTooShort(f"need at least {cfg.h + cfg.p + 1} points, got {target.size}")
    X, Y = phi_training_windows(target, cfg, rng.split("phi-traces"))
    model = Forecaster.create(kind, 2, cfg.h, cfg.p, rng.split("phi-init"), hidden=cfg.hidden)
    fit_windows(model, X, Y, cfg.forecaster_epochs, cfg.learning_rate_forecaster, rng.split("phi-fit"), cfg.batch_size)
    return model
