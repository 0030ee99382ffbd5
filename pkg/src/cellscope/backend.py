"""Kernel backend selection: compiled extension if available, numpy otherwise.

Set CELLSCOPE_BACKEND=numpy (or =cython) to force a choice; forcing the
extension when it is not built raises at import time.
"""

from __future__ import annotations

import os

from . import _kernels_py

_FORCED = os.environ.get("CELLSCOPE_BACKEND", "").strip().lower()

if _FORCED in ("", "cython", "compiled"):
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _FORCED:
            raise
        _impl = _kernels_py
elif _FORCED in ("numpy", "python"):
    _impl = _kernels_py
else:
    raise ValueError(f"unknown CELLSCOPE_BACKEND value: {_FORCED!r}")

BACKEND_NAME: str = _impl.NAME

leaky_relu = _impl.leaky_relu
leaky_relu_grad = _impl.leaky_relu_grad
span_softmax = _impl.span_softmax
mixed_loss_grad = _impl.mixed_loss_grad
adam_update = _impl.adam_update


def available_backends() -> list[str]:
    names = []
    try:
        from . import _core  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    names.append("numpy")
    return names
