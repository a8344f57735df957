"""numba switch.

Hot kernels come in pairs: an ``@njit`` version and a pure-numpy version
with identical semantics. ``CONVFNO_DISABLE_NUMBA=1`` (or a missing numba)
selects the numpy path. :func:`use_numba` flips it at runtime for
benchmarks and parity tests.
"""
from __future__ import annotations

import contextlib
import functools
import os

ENV_FLAG = "CONVFNO_DISABLE_NUMBA"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_enabled = HAVE_NUMBA and os.environ.get(ENV_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


def numba_enabled() -> bool:
    return _enabled


def set_numba(flag: bool) -> None:
    global _enabled
    _enabled = bool(flag) and HAVE_NUMBA


@contextlib.contextmanager
def use_numba(flag: bool):
    prev = _enabled
    set_numba(flag)
    try:
        yield
    finally:
        set_numba(prev)


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)``, or the identity when numba is unavailable."""
    opts = {"cache": True, **kwargs}

    def wrap(f):
        if not HAVE_NUMBA:
            return f
        return numba.njit(**opts)(f)

    return wrap(func) if func is not None else wrap


def dispatch(fast, slow):
    """Call ``fast`` when numba is enabled, else ``slow``."""

    @functools.wraps(slow)
    def call(*args, **kwargs):
        return (fast if _enabled else slow)(*args, **kwargs)

    call.fast = fast
    call.slow = slow
    return call
