"""Backend selection for the accelerated kernels.

The hot loops (Euler-Maruyama particle integration) exist twice: a numba
@njit implementation and a vectorized pure-numpy fallback consuming the
identical counter-based random stream, so results are bit-identical.
Selection: env var ``RMTFLOW_NO_NUMBA=1`` forces the numpy path; otherwise
numba is used when importable.
"""

import os


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def use_numba() -> bool:
    if os.environ.get("RMTFLOW_NO_NUMBA", "") == "1":
        return False
    return _numba_available()


def njit(*args, **kwargs):
    """numba.njit when available, identity decorator otherwise."""
    if _numba_available():
        import numba

        return numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]

    def wrap(f):
        return f

    return wrap
