"""Optional numba acceleration.

Set ``DTF_DISABLE_NUMBA=1`` in the environment before importing :mod:`dtfnet`
to force the pure-numpy implementations of every kernel.
"""

import os

_DISABLED = os.environ.get("DTF_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError
    import numba as _numba
except ImportError:
    _numba = None

HAS_NUMBA = _numba is not None


def jit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if HAS_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func
