"""Numba availability and the switch between compiled and numpy kernels.

Set ``LOCUT_DISABLE_NUMBA=1`` to force the pure-numpy code paths (useful for
debugging and for checking that both paths agree).
"""

import os

_flag = os.environ.get("LOCUT_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _flag not in ("", "0", "false", "no")

try:
    import numba  # noqa: F401

    NUMBA_INSTALLED = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_INSTALLED = False

USE_NUMBA = NUMBA_INSTALLED and not DISABLED_BY_ENV


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, otherwise a no-op decorator.

    The compiled variants live next to the numpy ones in :mod:`locut.kernels`;
    which one is exported is decided by :data:`USE_NUMBA`.
    """
    if NUMBA_INSTALLED:
        import numba

        return numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
