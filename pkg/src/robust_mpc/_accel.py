"""JIT switch for the numeric kernels.

Set ``ROBUST_MPC_NO_JIT=1`` to run every kernel as plain Python/numpy.
The same source is used on both paths, so results agree to round-off.
"""

import os

_DISABLED = os.environ.get("ROBUST_MPC_NO_JIT", "").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

JIT_ENABLED = numba is not None and not _DISABLED


def njit(fn):
    if JIT_ENABLED:
        return numba.njit(cache=True)(fn)
    return fn
