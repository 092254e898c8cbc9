"""Hot-loop kernels with an import-time backend choice.

The compiled ``_ckernel`` extension is used when it was built; otherwise the
pure-Python ``_pykernel`` twin is loaded. Set ``CIRCFORM_KERNEL=python`` to
force the fallback.
"""

from __future__ import annotations

import importlib
import os
from types import ModuleType

_NAMES = ("python", "cython")


def load(name: str) -> ModuleType:
    """Import a specific backend by name (``"python"`` or ``"cython"``)."""
    if name not in _NAMES:
        raise ValueError(f"unknown kernel backend {name!r}; expected one of {_NAMES}")
    module = "_pykernel" if name == "python" else "_ckernel"
    return importlib.import_module(f"{__name__}.{module}")


def available() -> list[str]:
    names = ["python"]
    try:
        load("cython")
    except ImportError:
        pass
    else:
        names.append("cython")
    return names


def _select() -> ModuleType:
    forced = os.environ.get("CIRCFORM_KERNEL", "").strip().lower()
    if forced:
        return load(forced)
    try:
        return load("cython")
    except ImportError:
        return load("python")


kernel = _select()
BACKEND: str = kernel.BACKEND

__all__ = ["BACKEND", "available", "kernel", "load"]
