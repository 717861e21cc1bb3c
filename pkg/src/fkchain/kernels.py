"""Kernel backend selection.

The compiled extension ``_ckernels`` is used when it imports; otherwise the numpy
implementation in ``_pykernels`` is used. Setting ``FKCHAIN_PURE_PYTHON=1`` forces
the fallback.
"""
from __future__ import annotations

import os

from . import _pykernels
from ._pykernels import DT_MIN, StepSizeUnderflow

_compiled = None
if not os.environ.get("FKCHAIN_PURE_PYTHON"):
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _pykernels
BACKEND = "compiled" if _compiled is not None else "python"


def get(name: str | None = None):
    """Kernel module by name (``"compiled"`` or ``"python"``); default is the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")


def compiled_available() -> bool:
    return _compiled is not None


rhs = _impl.rhs
integrate = _impl.integrate

__all__ = ["BACKEND", "DT_MIN", "StepSizeUnderflow", "get", "compiled_available", "rhs", "integrate"]
