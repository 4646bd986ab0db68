"""Backend selection for the compiled kernels.

Set ``RANKCAL_NUMBA=0`` before import to force the pure-numpy code paths.
Both paths are always importable so they can be compared side by side.
"""
import os

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_flag():
    value = os.environ.get("RANKCAL_NUMBA", "1").strip().lower()
    return value not in ("0", "false", "no", "off")


USE_NUMBA = HAVE_NUMBA and _env_flag()


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or an identity decorator without numba."""
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)


def backend():
    return "numba" if USE_NUMBA else "numpy"
