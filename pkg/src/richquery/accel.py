"""Numba acceleration switch.

The hot kernels in :mod:`richquery.kernels` exist twice: once as explicit
loops compiled with ``numba.njit`` and once as vectorized numpy code.  The
environment variable ``RICHQUERY_NUMBA`` selects the path at import time:

    RICHQUERY_NUMBA=1   compile loop kernels with numba (default)
    RICHQUERY_NUMBA=0   pure-numpy fallback, identical results

If numba is not importable the fallback is used regardless of the flag.
``benchmarks/bench_kernels.py`` compares both paths.
"""

import os

_flag = os.environ.get("RICHQUERY_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _flag not in ("0", "false", "off", "no")
NUMBA_ENABLED = False

if NUMBA_REQUESTED:
    try:
        from numba import njit, prange  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        pass

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):
        """Identity decorator standing in for numba.njit."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap

    prange = range
