"""Optional numba acceleration.

Set ``CLASSCNET_NUMBA=0`` to force the pure-numpy code paths (useful for
debugging and for the benchmark).  When numba is missing the numpy paths
are used automatically.
"""
import logging
import os

_flag = os.environ.get("CLASSCNET_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    import numba

    logging.getLogger("numba").setLevel(logging.WARNING)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = _requested and HAVE_NUMBA


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
