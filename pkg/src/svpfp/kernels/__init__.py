"""Particle kernel backend selection.

The compiled extension is preferred when it imports cleanly; otherwise the
pure-numpy fallback is used.  Set SVPFP_KERNEL_BACKEND=pure (or =cython) to
force a choice; forcing cython raises if the extension is unavailable.
"""
from __future__ import annotations

import os

from . import _pure

_requested = os.environ.get("SVPFP_KERNEL_BACKEND", "auto").lower()

if _requested == "pure":
    _impl = _pure
elif _requested in ("auto", "cython"):
    try:
        from . import _core

        _impl = _core
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _pure
else:
    raise RuntimeError(f"unknown SVPFP_KERNEL_BACKEND={_requested!r}")

backend_name: str = _impl.BACKEND_NAME
deposit_cic = _impl.deposit_cic
gather_linear = _impl.gather_linear


def get_backend(name: str):
    """Explicit backend lookup, used by the benchmark and the tests."""
    if name == "pure":
        return _pure
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")


__all__ = ["deposit_cic", "gather_linear", "backend_name", "get_backend"]
