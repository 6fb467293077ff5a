"""Kernel backend selection.

The numeric kernels ship in two interchangeable implementations: numba-jitted
loops and a vectorized pure-numpy fallback.  The choice is made once, at
import time, from the ``DRMEAN_BACKEND`` environment variable:

* ``auto`` (default) -- numba when importable, numpy otherwise;
* ``numba``          -- require numba, fail if it cannot be imported;
* ``numpy``          -- force the pure-numpy path.

Both backends implement the same algorithms and status codes; results agree
to floating-point roundoff (summation order differs).
"""

import os

_CHOICES = ("auto", "numba", "numpy")


def _resolve() -> str:
    requested = os.environ.get("DRMEAN_BACKEND", "auto").strip().lower()
    if requested not in _CHOICES:
        raise ValueError(
            f"DRMEAN_BACKEND must be one of {_CHOICES}, got {requested!r}"
        )
    if requested == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if requested == "numba":
            raise
        return "numpy"
    return "numba"


ACTIVE_BACKEND = _resolve()
