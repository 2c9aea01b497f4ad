"""Kernel backend selection and the thread-count knob.

OVERSCALE_LAB_BACKEND chooses between the numba JIT kernels (default when
numba imports) and the pure-numpy fallback; both produce identical tallies.
OVERSCALE_LAB_THREADS caps worker threads for per-question parallel work.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_numpy

VALID_BACKENDS = ("numba", "numpy")


def _load_numba_kernels() -> ModuleType | None:
    try:
        from . import _kernels_numba
    except ImportError:
        return None
    return _kernels_numba


def get_backend(name: str | None = None) -> ModuleType:
    """Resolve a kernel module from an explicit name or the environment."""
    if name is None:
        name = os.environ.get("OVERSCALE_LAB_BACKEND", "").strip().lower() or None
    if name is None:
        mod = _load_numba_kernels()
        return mod if mod is not None else _kernels_numpy
    if name not in VALID_BACKENDS:
        raise ValueError(
            f"unknown backend {name!r}; expected one of {VALID_BACKENDS}"
        )
    if name == "numba":
        mod = _load_numba_kernels()
        if mod is None:
            raise RuntimeError("numba backend requested but numba is not importable")
        return mod
    return _kernels_numpy


def backend_name(mod: ModuleType) -> str:
    return "numba" if mod.__name__.endswith("_kernels_numba") else "numpy"


def thread_budget() -> int:
    """Worker-thread cap from OVERSCALE_LAB_THREADS (default: all cores)."""
    raw = os.environ.get("OVERSCALE_LAB_THREADS", "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError as exc:
            raise ValueError(
                f"OVERSCALE_LAB_THREADS must be an integer, got {raw!r}"
            ) from exc
        return max(1, value)
    return max(1, os.cpu_count() or 1)
