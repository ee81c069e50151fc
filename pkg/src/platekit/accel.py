"""Numba on/off switch.

Hot kernels live twice: a numba ``@njit`` version (kernels_numba) and a
vectorized pure-numpy version (kernels_numpy). The numba path is the
default; set ``PLATEKIT_NO_NUMBA=1`` to force the numpy path, e.g. for
debugging or on platforms where numba is unavailable. ``kernels.py``
re-exports whichever implementation this module selects.
"""

import os

ENV_FLAG = "PLATEKIT_NO_NUMBA"

USE_NUMBA = os.environ.get(ENV_FLAG, "0") != "1"

if USE_NUMBA:
    try:
        import numba  # noqa: F401
    except ImportError:
        USE_NUMBA = False


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
