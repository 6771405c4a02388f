"""Classical trend filters used as baselines.

All filters take a 1-d array and return an array of the same length.
"""

from __future__ import annotations

import warnings

import numpy as np

from . import _kernels
from .core import DataError, NonConvergence, NonFiniteInput, TooShort


class EvenWindow(DataError):
    pass


class WindowTooLarge(DataError):
    pass


class NonConvergenceWarning(RuntimeWarning):
    pass


def _as_series(y, min_len=1) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise DataError("expected a one-dimensional series")
    if y.size < min_len:
        raise TooShort(f"series of length {y.size} is shorter than {min_len}")
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput("series contains NaN or Inf")
    return y


def second_difference(x) -> np.ndarray:
    """Apply D, the (N-2) x N operator with rows (1, -2, 1)."""
    x = np.asarray(x, dtype=np.float64)
    return x[:-2] - 2.0 * x[1:-1] + x[2:]


def second_difference_t(z, n: int) -> np.ndarray:
    """Apply D^T to a length N-2 vector."""
    out = np.zeros(n)
    out[:-2] += z
    out[1:-1] -= 2.0 * z
    out[2:] += z
    return out


def dtd_bands(n: int):
    """Diagonal, first and second off-diagonals of D^T D."""
    # accumulate each row (1, -2, 1) of D; stays correct for n = 3 and 4
    stencil = np.array([1.0, -2.0, 1.0])
    d = np.zeros(n)
    e = np.zeros(n - 1)
    for k in range(3):
        d[k : n - 2 + k] += stencil[k] ** 2
    for k in range(2):
        e[k : n - 2 + k] += stencil[k] * stencil[k + 1]
    f = np.ones(n - 2)
    return d, e, f


def _system(n: int, scale: float):
    d, e, f = dtd_bands(n)
    return 1.0 + scale * d, scale * e, scale * f


def hp_filter(y, lamb: float) -> np.ndarray:
    """Hodrick-Prescott trend.

    Minimises ``||y - tau||^2 + 2 * lamb * ||D tau||^2`` by solving the
    pentadiagonal system ``(I + 2 lamb D^T D) tau = y``.

    The factor 2 makes ``lamb`` the same number as in the common
    ``1/2 ||y - tau||^2 + lamb ||D tau||^2`` convention.
    """
    y = _as_series(y, 3)
    if not np.isfinite(lamb) or lamb < 0:
        raise DataError("lambda must be finite and non-negative")
    if lamb == 0:
        return y.copy()
    d, e, f = _system(y.size, 2.0 * lamb)
    return _kernels.PentaSolver(d, e, f).solve(y)


def hp_residual(y, tau, lamb: float) -> float:
    """Sup-norm of ``(I + 2 lamb D^T D) tau - y``."""
    y = np.asarray(y, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    lhs = tau + 2.0 * lamb * second_difference_t(second_difference(tau), tau.size)
    return float(np.max(np.abs(lhs - y)))


def l1_objective(y, tau, lamb: float) -> float:
    return 0.5 * float(np.sum((y - tau) ** 2)) + lamb * float(np.sum(np.abs(second_difference(tau))))


def _soft(x, k):
    return np.sign(x) * np.maximum(np.abs(x) - k, 0.0)


def l1_filter(
    y,
    lamb: float,
    tol: float = 1e-8,
    max_iter: int = 20000,
    rho: float = 1.0,
    strict: bool = False,
    history: list | None = None,
) -> np.ndarray:
    """l1 trend filter via ADMM on the split ``z = D tau``.

    Minimises ``1/2 ||y - tau||^2 + lamb ||D tau||_1``. Stops when both the
    primal and dual residual norms drop below ``tol`` (scaled by sqrt(N)).
    ``rho`` is rebalanced by a factor 2 whenever one residual exceeds the
    other by 10x.

    On hitting ``max_iter`` the best iterate by objective is returned with a
    :class:`NonConvergenceWarning`, or :class:`NonConvergence` is raised when
    ``strict`` is set. If ``history`` is a list, the objective of every
    iterate is appended to it.
    """
    y = _as_series(y, 3)
    if not np.isfinite(lamb) or lamb < 0:
        raise DataError("lambda must be finite and non-negative")
    if lamb == 0:
        return y.copy()
    n = y.size
    scale_tol = tol * np.sqrt(n)
    tau = y.copy()
    z = second_difference(tau)
    u = np.zeros(n - 2)
    solver = _kernels.PentaSolver(*_system(n, rho))
    best, best_obj = tau.copy(), l1_objective(y, tau, lamb)
    for it in range(1, max_iter + 1):
        tau = solver.solve(y + rho * second_difference_t(z - u, n))
        dtau = second_difference(tau)
        z_old = z
        z = _soft(dtau + u, lamb / rho)
        u += dtau - z
        obj = l1_objective(y, tau, lamb)
        if history is not None:
            history.append(obj)
        if obj < best_obj:
            best, best_obj = tau.copy(), obj
        r_norm = np.linalg.norm(dtau - z)
        s_norm = rho * np.linalg.norm(second_difference_t(z - z_old, n))
        if r_norm < scale_tol and s_norm < scale_tol:
            return tau
        if r_norm > 10.0 * s_norm or s_norm > 10.0 * r_norm:
            factor = 2.0 if r_norm > s_norm else 0.5
            rho *= factor
            u /= factor
            solver = _kernels.PentaSolver(*_system(n, rho))
    message = f"ADMM did not converge in {max_iter} iterations (primal {r_norm:.3g}, dual {s_norm:.3g})"
    if strict:
        raise NonConvergence(message, best=best, iterations=max_iter)
    warnings.warn(message, NonConvergenceWarning, stacklevel=2)
    return best


def median_filter(y, window: int) -> np.ndarray:
    """Running median; edge windows shrink symmetrically to fit the series."""
    y = _as_series(y)
    if window < 1 or window % 2 == 0:
        raise EvenWindow(f"window must be a positive odd integer, got {window}")
    if window > y.size:
        raise WindowTooLarge(f"window {window} exceeds series length {y.size}")
    return _kernels.median_kernel(y, int(window))


def moving_average(y, window: int) -> np.ndarray:
    """Centred running mean with edge-replication padding."""
    y = _as_series(y)
    if window < 1:
        raise DataError("window must be >= 1")
    if window > y.size:
        raise WindowTooLarge(f"window {window} exceeds series length {y.size}")
    return _kernels.moving_average_kernel(y, int(window))


def haar_denoise(y, threshold: float, levels: int) -> np.ndarray:
    """Soft-thresholded Haar wavelet shrinkage.

    The series is zero-padded to the next power of two, decomposed to
    ``levels`` (capped at log2 of the padded length), detail coefficients are
    soft-thresholded, and the reconstruction is cut back to the input length.
    """
    y = _as_series(y, 2)
    if threshold < 0:
        raise DataError("threshold must be >= 0")
    if levels < 1:
        raise DataError("levels must be >= 1")
    n = y.size
    size = 1 << int(np.ceil(np.log2(n)))
    levels = min(levels, int(np.log2(size)))
    approx = np.zeros(size)
    approx[:n] = y
    details = []
    s = np.sqrt(0.5)
    for _ in range(levels):
        even, odd = approx[0::2], approx[1::2]
        details.append(_soft((even - odd) * s, threshold))
        approx = (even + odd) * s
    for det in reversed(details):
        out = np.empty(approx.size * 2)
        out[0::2] = (approx + det) * s
        out[1::2] = (approx - det) * s
        approx = out
    return approx[:n]
