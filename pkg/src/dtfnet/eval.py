"""Trend-quality metrics, the baseline comparison table and the forecasting
augmentation experiment."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass

import numpy as np

from .core import (
    DataError,
    LabeledSeries,
    LengthMismatch,
    NoGroundTruth,
    RunConfig,
    TooShort,
    as_rng,
    as_trend,
    write_csv,
)
from . import filters
from .forecast import Forecaster, fit_windows, make_windows, mse_loss, predict
from .nn import AdamState


class UnknownMethod(DataError):
    pass


class HorizonTooLong(DataError):
    pass


SeriesTooShort = TooShort

METRIC_FIELDS = ("mse_full", "mae_full", "mse_abrupt", "mae_abrupt", "noise_reduction")


@dataclass(frozen=True)
class TrendMetrics:
    mse_full: float
    mae_full: float
    mse_abrupt: float
    mae_abrupt: float
    noise_reduction: float

    def as_dict(self) -> dict:
        return asdict(self)


def abrupt_index_set(indices, n: int, window: int = 30) -> np.ndarray:
    """Sorted union of ``[i - window//2, i + window//2]`` clipped to ``[0, n)``."""
    half = window // 2
    mask = np.zeros(n, dtype=bool)
    for i in indices:
        mask[max(0, i - half) : min(n, i + half + 1)] = True
    return np.flatnonzero(mask)


def trend_metrics(trend, series: LabeledSeries, window: int = 30) -> TrendMetrics:
    """Errors of ``trend`` against the clean signal, overall and near labels.

    ``noise_reduction`` is ``1 - var(trend - clean) / var(noisy - clean)``:
    1 for a perfect trend, 0 for returning the noisy input unchanged.
    """
    if series.clean is None or not len(series.abrupt_indices):
        raise NoGroundTruth("metrics need a clean signal and labelled abrupt changes")
    trend = as_trend(trend)
    clean = series.clean
    if trend.size != clean.size:
        raise LengthMismatch(f"trend length {trend.size} != series length {clean.size}")
    err = trend - clean
    idx = abrupt_index_set(series.abrupt_indices, clean.size, window)
    noise_var = np.var(series.target - clean)
    resid_var = np.var(err)
    if noise_var > 0:
        nr = 1.0 - resid_var / noise_var
    else:
        nr = 1.0 if resid_var == 0 else -np.inf
    return TrendMetrics(
        float(np.mean(err**2)),
        float(np.mean(np.abs(err))),
        float(np.mean(err[idx] ** 2)),
        float(np.mean(np.abs(err[idx]))),
        float(nr),
    )


# --- baseline comparison ----------------------------------------------------

METHODS = ("dtf", "hp", "l1", "median", "ma", "haar")
DEFAULT_PARAMS = {"hp": 1600.0, "l1": 0.1, "median": 21, "ma": 25, "haar": None}
HAAR_LEVELS = 4


def _haar_universal(y, threshold):
    if threshold is None:
        finest = (y[0 : y.size - 1 : 2] - y[1::2]) * np.sqrt(0.5)
        sigma = np.median(np.abs(finest)) / 0.6745
        threshold = sigma * np.sqrt(2.0 * np.log(y.size))
    return filters.haar_denoise(y, threshold, HAAR_LEVELS)


def parse_method(spec: str):
    """``"l1"`` or ``"l1:5e-4"`` -> ``("l1", param)``; the label keeps the text."""
    name, _, arg = spec.strip().partition(":")
    name = name.lower()
    if name not in METHODS:
        raise UnknownMethod(f"unknown method {spec!r}; choose from {', '.join(METHODS)}")
    if not arg:
        return name, DEFAULT_PARAMS.get(name)
    try:
        value = float(arg)
    except ValueError:
        raise UnknownMethod(f"bad parameter in {spec!r}") from None
    return name, int(value) if name in ("median", "ma") else value


def run_method(spec: str, series: LabeledSeries, cfg: RunConfig, policy=None, rng=None):
    """Trend from one method. ``dtf`` trains a policy unless one is given.

    Returns ``(trend, actions)``; ``actions`` is ``None`` for classical filters.
    """
    name, param = parse_method(spec)
    y = series.target
    if name == "hp":
        return filters.hp_filter(y, param), None
    if name == "l1":
        return filters.l1_filter(y, param), None
    if name == "median":
        return filters.median_filter(y, param), None
    if name == "ma":
        return filters.moving_average(y, param), None
    if name == "haar":
        return _haar_universal(y, param), None
    from .dtf import extract_trend, train_agent
    from .forecast import phi_pretrain

    if policy is None:
        rng = as_rng(cfg.seed if rng is None else rng)
        phi = phi_pretrain(series, cfg, rng.split("phi"))
        policy = train_agent(series, cfg, phi, rng.split("agent")).policy
    return extract_trend(series, policy, cfg)


def comparison_table(series: LabeledSeries, methods, cfg: RunConfig, policy=None, rng=None) -> list:
    """Rows ``(method, TrendMetrics)`` in request order.

    Every method sees the same series; a ``dtf`` row trains its own policy
    from ``cfg.seed`` (or uses ``policy``), so results do not depend on the
    order of the request.
    """
    for m in methods:
        parse_method(m)
    rows = []
    for m in methods:
        trend, _ = run_method(m, series, cfg, policy=policy, rng=rng)
        rows.append((m, trend_metrics(trend, series)))
    return rows


def table_columns(rows) -> dict:
    cols = {"method": [m for m, _ in rows]}
    for f in METRIC_FIELDS:
        cols[f] = [getattr(r, f) for _, r in rows]
    return cols


def write_table_csv(rows, path) -> None:
    write_csv(path, table_columns(rows))


def write_plot_csv(path, series: LabeledSeries, trend, actions=None) -> None:
    """Tidy per-timestep table (t, raw, clean, trend, action) for plotting."""
    n = series.n
    trend = as_trend(trend, n)
    clean = series.clean if series.clean is not None else np.full(n, np.nan)
    acts = np.zeros(n, dtype=np.int64) if actions is None else np.asarray(actions, dtype=np.int64)
    write_csv(path, {"t": range(n), "raw": series.target, "clean": clean, "trend": trend, "action": acts})


# --- forecasting with an extra trend channel --------------------------------


def split_borders(n: int, lookback: int):
    """Chronological 70/10/20 split; val and test windows may look back into the
    previous split, as in the usual benchmark loaders."""
    n_train = int(n * 0.7)
    n_test = int(n * 0.2)
    n_val = n - n_train - n_test
    return {
        "train": (0, n_train),
        "val": (n_train - lookback, n_train + n_val),
        "test": (n - n_test - lookback, n),
    }


def _trend_rows(series: LabeledSeries, trend, cfg: RunConfig):
    """Per-window trend builder; ``None`` when no trend channel is used."""
    if trend is None:
        return None
    from .dtf import PolicyModel, interpolate_trend, policy_actions

    if isinstance(trend, PolicyModel):
        # a single causal sweep; each window interpolates only its own labels
        acts = policy_actions(series.target, trend, cfg)
        return lambda look, lo, hi: interpolate_trend(look, acts[lo:hi])
    full = as_trend(trend, series.n)
    return lambda look, lo, hi: full[lo:hi]


def _windows(series, build, lookback, horizon, lo, hi):
    target = series.target[None, lo:hi]
    X, Y, starts = make_windows(target, lookback, horizon)
    if build is None:
        return X, Y
    trend = np.stack([build(x[0], lo + s, lo + s + lookback) for x, s in zip(X, starts)])
    return np.concatenate([X, trend[:, None, :]], axis=1), Y


def model_checksum(model: Forecaster) -> str:
    h = hashlib.sha256()
    for p in model.params:
        h.update(np.ascontiguousarray(p).tobytes())
    return h.hexdigest()


def tsf_experiment(series: LabeledSeries, trend, model_kind: str, horizons, cfg: RunConfig, rng=None,
                   lookback: int | None = None, return_models: bool = False):
    """Forecast with and without an extra trend channel.

    Parameters
    ----------
    trend : None, array or PolicyModel
        ``None`` trains on the raw target only. An array is a full-length
        trend channel sliced per window. A policy labels the series in one
        causal sweep and each window's channel interpolates the labels inside
        that window, so no value after the look-back is used.
    horizons : list of int
        One model is trained per horizon.

    Returns
    -------
    dict mapping horizon to ``(test_mse, test_mae)``; with ``return_models``
    also a dict of the trained forecasters.

    The model with the lowest validation loss over the training epochs is
    kept. Training and selection only touch values before the test split.
    """
    rng = as_rng(cfg.seed if rng is None else rng)
    lookback = cfg.h if lookback is None else int(lookback)
    n = series.n
    borders = split_borders(n, lookback)
    # the test split proper excludes the borrowed look-back
    test_len = borders["test"][1] - borders["test"][0] - 2 * lookback
    if n < 10 * (lookback + 1):
        raise SeriesTooShort(f"series of length {n} is too short for look-back {lookback}")
    build = _trend_rows(series, trend, cfg)
    channels = 1 if build is None else 2
    results, models = {}, {}
    for p in horizons:
        p = int(p)
        if p < 1 or p > test_len:
            raise HorizonTooLong(f"horizon {p} exceeds test length {test_len} minus look-back")
        Xtr, Ytr = _windows(series, build, lookback, p, *borders["train"])
        Xva, Yva = _windows(series, build, lookback, p, *borders["val"]) if borders["val"][1] - borders["val"][0] > lookback + p else (None, None)
        Xte, Yte = _windows(series, build, lookback, p, *borders["test"])
        stream = rng.split(("tsf", model_kind, p, channels))
        model = Forecaster.create(model_kind, channels, lookback, p, stream.split("init"), hidden=cfg.hidden)
        fit_rng = stream.split("fit")
        states = [AdamState.for_model(net) for net in model.nets]
        best, best_loss = model.copy(), np.inf
        for _ in range(cfg.forecaster_epochs):
            fit_windows(model, Xtr, Ytr, 1, cfg.learning_rate_forecaster, fit_rng, cfg.batch_size, states)
            loss = mse_loss(model, Xva, Yva) if Xva is not None else mse_loss(model, Xtr, Ytr)
            if loss < best_loss:
                best, best_loss = model.copy(), loss
        err = predict(best, Xte) - Yte
        results[p] = (float(np.mean(err**2)), float(np.mean(np.abs(err))))
        models[p] = best
    if return_models:
        return results, models
    return results
