"""Kernel backend selection.

Hot numeric kernels have two implementations: numba-jitted loops and a
pure-numpy path. The active one is picked once per process from the
LIPWAVE_BACKEND environment variable ("numba" or "numpy"); default is
numba when importable, numpy otherwise. Tests and the benchmark switch
explicitly via set_backend().
"""

from __future__ import annotations

import os

_ENV_VAR = "LIPWAVE_BACKEND"
_VALID = ("numba", "numpy")

_backend: str | None = None


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def active_backend() -> str:
    """Return the active kernel backend, resolving it on first call."""
    global _backend
    if _backend is None:
        choice = os.environ.get(_ENV_VAR, "").strip().lower()
        if choice:
            if choice not in _VALID:
                raise ValueError(
                    f"{_ENV_VAR} must be one of {_VALID}, got {choice!r}"
                )
            if choice == "numba" and not _numba_available():
                raise RuntimeError(f"{_ENV_VAR}=numba but numba is not importable")
            _backend = choice
        else:
            _backend = "numba" if _numba_available() else "numpy"
    return _backend


def set_backend(name: str) -> None:
    """Force a backend ("numba" or "numpy"). Overrides the env flag."""
    global _backend
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    if name == "numba" and not _numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    _backend = name


def use_numba() -> bool:
    return active_backend() == "numba"
