"""Numba switch for the hot kernels.

Set ``GPROA_DISABLE_NUMBA=1`` (any of 1/true/yes) to force the pure-numpy
fallbacks, e.g. for debugging or to benchmark the two paths against each
other. The flag is read once at import time.
"""
import os

_FLAG = os.environ.get("GPROA_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """Compile ``fn`` in nopython mode if numba is importable, else return it."""
    if not HAS_NUMBA:
        return fn
    return numba.njit(cache=True, fastmath=False)(fn)


def backend():
    return "numba" if USE_NUMBA else "numpy"
