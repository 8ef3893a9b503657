"""Backend selection for the hot numeric kernels.

Set ``TPP_DISABLE_NUMBA=1`` (or any of ``true``/``yes``) before importing
:mod:`tpp` to force the vectorised numpy implementations. Numba is also
skipped automatically when it cannot be imported.
"""

import os

_FLAG = "TPP_DISABLE_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


try:
    if not _numba_requested():
        raise ImportError("numba disabled by " + _FLAG)
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
