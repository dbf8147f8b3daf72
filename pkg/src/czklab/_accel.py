"""Optional numba acceleration for the numeric kernels.

Set ``CZKLAB_DISABLE_NUMBA=1`` to force the pure-numpy code paths; the
flag is read once at import time.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("CZKLAB_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG in {"1", "true", "yes", "on"}

try:
    if DISABLED_BY_ENV:
        raise ImportError("numba disabled via CZKLAB_DISABLE_NUMBA")
    from numba import njit as _numba_njit

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - depends on environment
    _numba_njit = None
    NUMBA_ENABLED = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if NUMBA_ENABLED:
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn
