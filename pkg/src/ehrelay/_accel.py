"""JIT selection.

Hot loops are compiled with numba unless ``EHRELAY_DISABLE_NUMBA`` is set to
a truthy value (or numba is missing), in which case the undecorated Python
functions run instead. Both paths execute the same source.
"""
import os

_FLAG = os.environ.get("EHRELAY_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USING_NUMBA = numba is not None and not DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity otherwise."""
    if not USING_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def python_impl(func):
    """Return the pure-Python body behind a possibly-jitted function."""
    return getattr(func, "py_func", func)
