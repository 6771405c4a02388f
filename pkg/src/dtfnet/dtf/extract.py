"""Greedy trend extraction with a trained policy."""

from __future__ import annotations

import numpy as np

from ..core import LabeledSeries, RunConfig
from .agents import PolicyModel
from .env import encode_state
from .trend import interpolate_trend


def policy_actions(values, policy: PolicyModel, cfg: RunConfig, start: int = 0, stop: int | None = None) -> np.ndarray:
    """One causal left-to-right sweep taking argmax actions.

    The decision at ``t`` sees only ``values[start:t + 1]`` and earlier
    decisions, so a prefix of the output never depends on later data.
    """
    values = np.asarray(values, dtype=np.float64)
    stop = values.size if stop is None else stop
    w = cfg.window
    acts = np.zeros(stop - start, dtype=np.int64)
    for i in range(stop - start):
        lo = max(0, i + 1 - w)
        window_acts = acts[lo : i + 1].copy()
        window_acts[-1] = 0
        state = encode_state(values[start + lo : start + i + 1], window_acts, cfg)
        acts[i] = policy.greedy(state)
    return acts


def extract_trend(series, policy: PolicyModel, cfg: RunConfig):
    """Return ``(trend, actions)`` for the whole series; DTPs are ``actions == 1``."""
    values = series.target if isinstance(series, LabeledSeries) else np.asarray(series, dtype=np.float64)
    acts = policy_actions(values, policy, cfg)
    return interpolate_trend(values, acts), acts
