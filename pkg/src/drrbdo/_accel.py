"""Kernel dispatch between numba-compiled loops and plain numpy.

Set ``DRRBDO_NO_NUMBA=1`` to force the numpy path (useful for debugging and
for platforms without numba).  The choice is made once, at import time.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("DRRBDO_NO_NUMBA", "").strip().lower() in _FALSY


def njit(fn):
    """Compile ``fn`` with numba (nopython, nogil, cached) when it is available."""
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def pick(nb_impl, np_impl):
    return nb_impl if USE_NUMBA else np_impl
