"""The trend-point-detection environment.

A series is cut into randomly placed episodes. At every step the agent sees
the recent values and its own past labels and decides whether the current
point is a trend point (action 1) or gets smoothed over (action 0). At a
sampled subset of steps the reward is the negative forecasting error of the
frozen predictor when fed the values plus the trend interpolated through the
labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import DataError, DtfError, LabeledSeries, LengthMismatch, RunConfig, TooShort, as_rng
from ..forecast import Forecaster
from .trend import interpolate_trend


class WindowInfeasible(DataError):
    pass


class WindowOutOfRange(DataError):
    pass


class EpisodeFinished(DtfError, RuntimeError):
    pass


class TooLarge(DataError):
    pass


SeriesTooShort = TooShort


@dataclass
class Episode:
    """One sampled sub-sequence ``[s, s + l)``; ``t`` points are labelled so far."""

    s: int
    l: int
    reward_steps: frozenset
    t: int = 0
    actions: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.actions is None:
            self.actions = np.zeros(self.l, dtype=np.int64)

    @property
    def done(self) -> bool:
        return self.t >= self.l


def _values(series) -> np.ndarray:
    if isinstance(series, LabeledSeries):
        return series.target
    return np.asarray(series, dtype=np.float64)


def select_reward_steps(l: int, ratio: float, mode: str, cfg: RunConfig, rng) -> frozenset:
    """Steps of an episode of length ``l`` at which the reward is computed.

    Only steps ``t >= h + p`` have a full look-back plus horizon behind them.
    ``random_interval`` draws ``round(ratio * l)`` of them without replacement
    (capped at the number eligible, at least one); ``equal_interval`` takes
    every ``round(1 / ratio)``-th eligible step starting at ``h + p``.
    """
    if not 0 < ratio <= 1:
        raise DataError("reward ratio must lie in (0, 1]")
    first = cfg.h + cfg.p
    eligible = np.arange(first, l)
    if eligible.size == 0:
        raise WindowInfeasible(f"episode length {l} leaves no step >= h + p = {first}")
    if mode == "equal_interval":
        stride = max(1, int(np.floor(1.0 / ratio + 0.5)))
        return frozenset(int(t) for t in eligible[::stride])
    if mode != "random_interval":
        raise DataError(f"unknown reward mode {mode!r}")
    count = min(eligible.size, max(1, int(np.floor(ratio * l + 0.5))))
    return frozenset(int(t) for t in as_rng(rng).choice(eligible, size=count, replace=False))


def sample_episode(series, cfg: RunConfig, rng, start: int = 0, stop: int | None = None) -> Episode:
    """Uniform start and uniform length in ``[h + p, min(H, N - s)]``.

    ``start``/``stop`` restrict sampling to a slice of the series (the
    returned ``s`` is still a global index). An episode of length exactly
    ``h + p`` has no reward-eligible step and gets an empty reward set.
    """
    rng = as_rng(rng)
    n = len(_values(series)) if stop is None else stop
    w = cfg.h + cfg.p
    if n - start < w + 1:
        raise SeriesTooShort(f"need at least h + p + 1 = {w + 1} points, got {n - start}")
    s = int(rng.integers(start, n - w + 1))
    l = int(rng.integers(w, min(cfg.H, n - s) + 1))
    if l > w:
        steps = select_reward_steps(l, cfg.reward_ratio, cfg.reward_mode, cfg, rng)
    else:
        steps = frozenset()
    return Episode(s, l, steps)


def positional_encoding(positions, d_model: int) -> np.ndarray:
    """Sinusoidal encoding: sin on even channels, cos on odd channels."""
    pos = np.asarray(positions, dtype=np.float64)[:, None]
    i = np.arange(d_model // 2, dtype=np.float64)
    angle = pos / np.power(10000.0, 2.0 * i / d_model)
    pe = np.empty((pos.shape[0], d_model))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe


def state_dim(cfg: RunConfig) -> int:
    return cfg.window * (2 + cfg.d_model)


def encode_state(values, actions, cfg: RunConfig) -> np.ndarray:
    """Fixed-width state from the last ``W = h + p`` (value, action) pairs.

    Visible values are z-scored within the window. Each visible slot holds
    ``[z, action, PE(pos)]`` where ``pos`` counts from the oldest visible
    slot; missing history is left-padded with all-zero slots. The caller
    passes the current (undecided) point with action 0.
    """
    values = np.asarray(values, dtype=np.float64)
    actions = np.asarray(actions)
    if values.shape != actions.shape or values.ndim != 1:
        raise LengthMismatch(f"values {values.shape} and actions {actions.shape} must be equal-length vectors")
    if values.size < 1:
        raise DataError("state needs at least one point")
    w = cfg.window
    k = min(values.size, w)
    v = values[-k:]
    centred = v - v.mean()
    sd = np.sqrt(np.mean(centred * centred))
    z = centred / sd if sd > 1e-12 else np.zeros(k)
    grid = np.zeros((w, 2 + cfg.d_model))
    grid[w - k :, 0] = z
    grid[w - k :, 1] = actions[-k:]
    grid[w - k :, 2:] = positional_encoding(np.arange(k), cfg.d_model)
    return grid.ravel()


def compute_reward(series, actions, t: int, phi: Forecaster, cfg: RunConfig) -> float:
    """Negative forecasting MSE on the slice ``[t - (h + p), t)``.

    The trend over the first ``h`` points of the slice interpolates the
    labelled anchors there; ``phi`` forecasts the last ``p`` points from
    ``[values, trend]``.
    """
    values = _values(series)
    actions = np.asarray(actions)
    h, p = cfg.h, cfg.p
    if t < h + p or t > min(values.size, actions.size):
        raise WindowOutOfRange(f"step {t} needs h + p = {h + p} labelled points before it")
    x = values[t - h - p : t]
    look = x[:h]
    trend = interpolate_trend(look, actions[t - h - p : t - p])
    y_hat = phi.predict(np.stack([look, trend]))
    err = x[h:] - y_hat
    return -float(np.mean(err * err))


def _episode_state(values, episode: Episode, cfg: RunConfig) -> np.ndarray:
    t = episode.t
    lo = max(0, t + 1 - cfg.window)
    vals = values[episode.s + lo : episode.s + t + 1]
    acts = episode.actions[lo : t + 1].copy()
    acts[-1] = 0
    return encode_state(vals, acts, cfg)


def env_step(episode: Episode, series, action: int, phi: Forecaster, cfg: RunConfig):
    """Label the current point; returns ``(next_state, reward, done)``.

    The reward is non-zero only at the episode's reward steps. The terminal
    state is an all-zero vector.
    """
    if episode.done:
        raise EpisodeFinished("episode already finished")
    if action not in (0, 1):
        raise DataError(f"action must be 0 or 1, got {action!r}")
    values = _values(series)
    t = episode.t
    episode.actions[t] = action
    reward = 0.0
    if t in episode.reward_steps:
        local = values[episode.s : episode.s + episode.l]
        reward = compute_reward(local, episode.actions, t, phi, cfg)
    episode.t += 1
    if episode.done:
        return np.zeros(state_dim(cfg)), reward, True
    return _episode_state(values, episode, cfg), reward, False


class TrendEnv:
    """Gym-style wrapper: ``reset() -> state``, ``step(a) -> (state, reward, done)``.

    ``start``/``stop`` confine episodes to a slice of the series.
    """

    def __init__(self, series, phi: Forecaster, cfg: RunConfig, rng=None, start: int = 0, stop: int | None = None):
        self.values = _values(series)
        self.phi = phi
        self.cfg = cfg
        self.rng = as_rng(cfg.seed if rng is None else rng)
        self.start = start
        self.stop = self.values.size if stop is None else stop
        self.state_dim = state_dim(cfg)
        self.episode = None

    @property
    def n_points(self) -> int:
        return self.stop - self.start

    def reset(self) -> np.ndarray:
        self.episode = sample_episode(self.values, self.cfg, self.rng, self.start, self.stop)
        return _episode_state(self.values, self.episode, self.cfg)

    def step(self, action: int):
        return env_step(self.episode, self.values, int(action), self.phi, self.cfg)


def brute_force_dtp(values, n: int | None, phi: Forecaster, cfg: RunConfig, return_all: bool = False):
    """Exhaustive search over the first ``n`` labels of an ``h + p`` window.

    Labels beyond position ``n`` stay 0. Ties go to the trace with fewer
    trend points, then to the lexicographically smaller one. Returns
    ``(best_actions, best_reward)`` and, with ``return_all``, the rewards of
    every candidate in enumeration order.
    """
    values = np.asarray(values, dtype=np.float64)
    w = cfg.h + cfg.p
    if values.size != w:
        raise DataError(f"window must have h + p = {w} points, got {values.size}")
    n = cfg.h if n is None else int(n)
    if n > 16:
        raise TooLarge(f"2**{n} candidates is too many to enumerate")
    if not 1 <= n <= w:
        raise DataError(f"n must lie in [1, {w}]")
    best = None
    rewards = np.empty(2**n)
    for code in range(2**n):
        acts = np.zeros(w, dtype=np.int64)
        acts[:n] = [(code >> (n - 1 - i)) & 1 for i in range(n)]
        r = compute_reward(values, acts, w, phi, cfg)
        rewards[code] = r
        key = (-r, int(acts.sum()), tuple(acts))
        if best is None or key < best[0]:
            best = (key, acts, r)
    if return_all:
        return best[1], best[2], rewards
    return best[1], best[2]
