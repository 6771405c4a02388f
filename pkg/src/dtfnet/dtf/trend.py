"""Turning a 0/1 action trace into a trend."""

import numpy as np

from .. import _kernels
from ..core import DataError, as_actions


def interpolate_trend(values, actions) -> np.ndarray:
    """Piecewise-linear trend through the anchored points (``actions == 1``).

    Anchors copy the raw value, gaps between anchors are filled linearly,
    the stretches before the first and after the last anchor repeat the
    nearest anchor, and a trace without anchors yields the mean of ``values``.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size < 1:
        raise DataError("values must be a non-empty 1-d array")
    actions = as_actions(actions, values.size)
    return _kernels.interp_fill(values, np.ascontiguousarray(actions))
