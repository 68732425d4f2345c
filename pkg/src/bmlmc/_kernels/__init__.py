"""Hot-kernel dispatch.

The heavy inner loops (synthetic sample batches, bulk statistics
accumulation, the wave time stepper) exist twice: a numba @njit build and
a pure numpy/scipy fallback.  Selection order:

  1. the BMLMC_KERNELS environment variable ("numba", "numpy", "auto"),
  2. "auto": numba if it imports, else numpy.

`set_backend` overrides at runtime (tests and the benchmark use it).
"""

from __future__ import annotations

import os

_active = None
_active_name = None


def _load(name: str):
    if name == "numpy":
        from . import numpy_impl as impl
    elif name == "numba":
        from . import numba_impl as impl
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    return impl


def _resolve_default():
    choice = os.environ.get("BMLMC_KERNELS", "auto").lower()
    if choice in ("numba", "numpy"):
        return _load(choice)
    if choice != "auto":
        raise ValueError(f"BMLMC_KERNELS must be numba|numpy|auto, got {choice!r}")
    try:
        return _load("numba")
    except ImportError:
        return _load("numpy")


def backend():
    global _active, _active_name
    if _active is None:
        _active = _resolve_default()
        _active_name = _active.NAME
    return _active


def backend_name() -> str:
    return backend().NAME


def set_backend(name: str) -> str:
    """Force a backend; returns the previous backend name."""
    global _active, _active_name
    prev = backend().NAME
    _active = _load(name)
    _active_name = name
    return prev


def synthetic_chunk(*args):
    return backend().synthetic_chunk(*args)


def welford_chunk(*args):
    return backend().welford_chunk(*args)


def wave_step_loop(*args):
    return backend().wave_step_loop(*args)
