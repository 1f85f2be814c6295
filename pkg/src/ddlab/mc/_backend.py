"""Select the episode kernels at import: compiled if available, else pure Python.

``DDLAB_BACKEND`` may be ``auto`` (default), ``compiled`` or ``python``.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _fallback


def _compiled() -> ModuleType | None:
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


def load(name: str | None = None) -> tuple[str, ModuleType]:
    name = (name or os.environ.get("DDLAB_BACKEND", "auto")).lower()
    if name not in ("auto", "compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name != "python":
        mod = _compiled()
        if mod is not None:
            return "compiled", mod
        if name == "compiled":
            raise ImportError("compiled kernels are not built; reinstall with Cython available")
    return "python", _fallback


BACKEND, kernels = load()
