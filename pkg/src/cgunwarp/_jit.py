"""Numba switch.

Set ``CGUNWARP_DISABLE_JIT=1`` to force the pure-numpy kernels. Numba being
absent has the same effect.
"""

import os

_disabled = os.environ.get("CGUNWARP_DISABLE_JIT", "0").strip().lower() in ("1", "true", "yes")

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _disabled


def njit(func):
    """Compile ``func`` with ``numba.njit(cache=True)``; identity without numba."""
    if _njit is None:  # pragma: no cover
        return func
    return _njit(cache=True)(func)
