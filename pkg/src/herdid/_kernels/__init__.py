"""JIT-compiled hot kernels with a pure-NumPy/Python fallback.

Set ``HERDID_NUMBA=0`` (or ``off``/``false``) before import to force the
fallback path; anything else uses numba when it is importable. The flag is
read once at import time.
"""

import os

_flag = os.environ.get("HERDID_NUMBA", "auto").strip().lower()

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via HERDID_NUMBA=0 runs
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _flag not in ("0", "off", "false", "no")


def jit_or_fallback(py_func):
    """Compile ``py_func`` with numba when enabled, else return it unchanged."""
    if USE_NUMBA:
        from numba import njit

        return njit(cache=True, nogil=True)(py_func)
    return py_func
