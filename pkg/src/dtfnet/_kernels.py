"""Hot inner loops.

Every kernel exists twice: a loop version compiled with numba and a vectorised
numpy/scipy version. The public names at the bottom pick the numba variant
unless numba is missing or ``DTF_DISABLE_NUMBA`` is set.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import cho_solve_banded, cholesky_banded

from ._compat import HAS_NUMBA, jit


# --- symmetric pentadiagonal solver ---------------------------------------


@jit
def _penta_factor_loop(d, e, f):
    """LDL^T factorisation of a symmetric pentadiagonal matrix.

    ``d`` is the diagonal, ``e`` the first and ``f`` the second off-diagonal.
    Returns ``(dd, l1, l2)`` with ``L[i, i-1] = l1[i]`` and ``L[i, i-2] = l2[i]``.
    """
    n = d.shape[0]
    dd = np.zeros(n)
    l1 = np.zeros(n)
    l2 = np.zeros(n)
    for i in range(n):
        if i >= 2:
            l2[i] = f[i - 2] / dd[i - 2]
        if i >= 1:
            acc = e[i - 1]
            if i >= 2:
                acc -= l2[i] * l1[i - 1] * dd[i - 2]
            l1[i] = acc / dd[i - 1]
        piv = d[i]
        if i >= 1:
            piv -= l1[i] * l1[i] * dd[i - 1]
        if i >= 2:
            piv -= l2[i] * l2[i] * dd[i - 2]
        dd[i] = piv
    return dd, l1, l2


@jit
def _penta_solve_loop(dd, l1, l2, b):
    n = b.shape[0]
    x = np.empty(n)
    for i in range(n):
        acc = b[i]
        if i >= 1:
            acc -= l1[i] * x[i - 1]
        if i >= 2:
            acc -= l2[i] * x[i - 2]
        x[i] = acc
    for i in range(n):
        x[i] /= dd[i]
    for i in range(n - 1, -1, -1):
        acc = x[i]
        if i + 1 < n:
            acc -= l1[i + 1] * x[i + 1]
        if i + 2 < n:
            acc -= l2[i + 2] * x[i + 2]
        x[i] = acc
    return x


class _NumbaPenta:
    def __init__(self, d, e, f):
        self._fac = _penta_factor_loop(
            np.ascontiguousarray(d, dtype=np.float64),
            np.ascontiguousarray(e, dtype=np.float64),
            np.ascontiguousarray(f, dtype=np.float64),
        )

    def solve(self, b):
        dd, l1, l2 = self._fac
        return _penta_solve_loop(dd, l1, l2, np.ascontiguousarray(b, dtype=np.float64))


class _ScipyPenta:
    def __init__(self, d, e, f):
        n = len(d)
        ab = np.zeros((3, n))
        ab[0] = d
        ab[1, : n - 1] = e
        ab[2, : n - 2] = f
        self._cb = cholesky_banded(ab, lower=True)

    def solve(self, b):
        return cho_solve_banded((self._cb, True), np.asarray(b, dtype=np.float64))


# --- anchor interpolation ---------------------------------------------------


@jit
def _interp_fill_loop(values, actions):
    n = values.shape[0]
    out = np.empty(n)
    prev = -1
    for i in range(n):
        if actions[i] == 1:
            out[i] = values[i]
            if prev < 0:
                for j in range(i):
                    out[j] = values[i]
            else:
                gap = i - prev
                for j in range(prev + 1, i):
                    w = (j - prev) / gap
                    out[j] = values[prev] + w * (values[i] - values[prev])
            prev = i
    if prev < 0:
        m = 0.0
        for i in range(n):
            m += values[i]
        m /= n
        for i in range(n):
            out[i] = m
    else:
        for j in range(prev + 1, n):
            out[j] = values[prev]
    return out


def _interp_fill_numpy(values, actions):
    knots = np.flatnonzero(actions == 1)
    if knots.size == 0:
        return np.full(values.shape[0], values.mean())
    return np.interp(np.arange(values.shape[0]), knots, values[knots])


# --- median filter with shrinking edge windows ---------------------------------


@jit
def _median_loop(y, window):
    n = y.shape[0]
    half = window // 2
    out = np.empty(n)
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        out[i] = np.median(y[lo:hi])
    return out


def _median_numpy(y, window):
    half = window // 2
    padded = np.pad(y.astype(np.float64), half, constant_values=np.nan)
    return np.nanmedian(sliding_window_view(padded, window), axis=1)


# --- centred moving average with edge replication ------------------------------


@jit
def _moving_average_loop(y, window):
    n = y.shape[0]
    left = (window - 1) // 2
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for k in range(i - left, i - left + window):
            j = min(max(k, 0), n - 1)
            acc += y[j]
        out[i] = acc / window
    return out


def _moving_average_numpy(y, window):
    left = (window - 1) // 2
    padded = np.pad(y.astype(np.float64), (left, window - 1 - left), mode="edge")
    return sliding_window_view(padded, window).sum(axis=1) / window


# --- generalised advantage estimation ---------------------------------------


def _gae_py(rewards, values, dones, last_value, gamma, lam):
    n = rewards.shape[0]
    adv = np.zeros(n)
    running = 0.0
    for i in range(n - 1, -1, -1):
        if i == n - 1:
            next_value = last_value
        else:
            next_value = values[i + 1]
        nonterminal = 1.0 - dones[i]
        delta = rewards[i] + gamma * next_value * nonterminal - values[i]
        running = delta + gamma * lam * nonterminal * running
        adv[i] = running
    return adv


_gae_loop = jit(_gae_py)


def _gae_numpy(rewards, values, dones, last_value, gamma, lam):
    # the recursion is sequential; numpy only vectorises the TD residuals
    next_values = np.append(values[1:], last_value)
    nonterminal = 1.0 - dones
    deltas = rewards + gamma * next_values * nonterminal - values
    adv = np.zeros_like(deltas)
    running = 0.0
    for i in range(len(deltas) - 1, -1, -1):
        running = deltas[i] + gamma * lam * nonterminal[i] * running
        adv[i] = running
    return adv


if HAS_NUMBA:
    PentaSolver = _NumbaPenta
    interp_fill = _interp_fill_loop
    median_kernel = _median_loop
    moving_average_kernel = _moving_average_loop
    gae_kernel = _gae_loop
else:
    PentaSolver = _ScipyPenta
    interp_fill = _interp_fill_numpy
    median_kernel = _median_numpy
    moving_average_kernel = _moving_average_numpy
    gae_kernel = _gae_numpy

BACKEND = "numba" if HAS_NUMBA else "numpy"
