"""numba shim.

Hot kernels are written once in a numba-compatible subset of Python and
compiled with ``njit`` when numba is importable.  Setting the environment
variable ``QCAD_DISABLE_JIT=1`` (before import) forces the pure-numpy
fallback paths instead, which is what the benchmark compares against.
"""
import os

_disabled = os.environ.get("QCAD_DISABLE_JIT", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _disabled:
        raise ImportError("disabled by QCAD_DISABLE_JIT")
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` or a no-op decorator without numba."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


__all__ = ["njit", "HAVE_NUMBA", "backend"]
