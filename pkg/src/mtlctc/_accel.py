"""Numba switch.

Hot loops (CTC recursions, LSTM recurrences, edit distance) come in two
flavours: an explicit-loop kernel compiled with ``numba.njit`` and a
vectorised pure-numpy twin.  Set ``MTLCTC_NUMBA=0`` before import to force
the numpy path; it is also used automatically when numba is missing.
"""
import os

_flag = os.environ.get("MTLCTC_NUMBA", "1").strip().lower()
_wanted = _flag not in ("0", "false", "no", "off")

try:
    import numba as _nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    _nb = None

USE_NUMBA = _wanted and _nb is not None


def njit(func):
    """Compile ``func`` in nopython mode, or return it untouched when disabled."""
    if not USE_NUMBA:
        return func
    return _nb.njit(cache=True, nogil=True)(func)
