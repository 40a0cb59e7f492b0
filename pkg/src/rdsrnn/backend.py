"""Kernel backend selection.

Hot state-recursion kernels ship in two variants: a numba-compiled loop and a
pure-numpy fallback. The compiled variant is used whenever numba imports and
the environment variable ``RDSRNN_NUMBA`` is not ``"0"``. Set
``RDSRNN_NUMBA=0`` to force the numpy path (debugging, or benchmarking the
compiled speedup with ``benchmarks/bench_backends.py``).

Selection happens once at import. Within either backend results are
bit-reproducible; across backends they may differ by a few ulp because the
numpy fallbacks vectorise over the batch axis (different summation order).
"""

import os

ENV_FLAG = "RDSRNN_NUMBA"


def _detect() -> bool:
    if os.environ.get(ENV_FLAG, "1") == "0":
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _detect()

if NUMBA_ENABLED:
    from numba import njit
else:
    def njit(*args, **kwargs):
        """Pass-through stand-in for numba.njit when the JIT is disabled."""
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap
