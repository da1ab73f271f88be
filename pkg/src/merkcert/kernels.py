"""Kernel selection: compiled extension when available, pure Python otherwise.

Set ``MERKCERT_KERNEL=python`` to force the fallback (useful for
benchmarking the two implementations against each other).
"""

from __future__ import annotations

import os
from types import ModuleType

from merkcert import _pykernel

try:
    from merkcert import _native  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - depends on build environment
    _native = None

_FORCED = os.environ.get("MERKCERT_KERNEL", "").strip().lower()

KERNEL_NAMES = ("auto", "native", "python")


def have_native() -> bool:
    return _native is not None


def default_kernel_name() -> str:
    if _FORCED in ("native", "python"):
        return _FORCED
    return "native" if _native is not None else "python"


def kernel(name: str = "auto") -> ModuleType:
    """Resolve a kernel by name ('auto', 'native', 'python')."""
    if name == "auto":
        name = default_kernel_name()
    if name == "native":
        if _native is None:
            raise RuntimeError("native kernel requested but the extension is not built")
        return _native
    if name == "python":
        return _pykernel
    raise ValueError(f"unknown kernel {name!r}; expected one of {KERNEL_NAMES}")
