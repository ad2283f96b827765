"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise (or when the
``COOPETITION_PURE`` environment variable is set to a non-empty value other
than ``0``) the pure Python fallback is used.
"""

from __future__ import annotations

import os

from . import _pykernels

python_kernels = _pykernels

try:
    from . import _ckernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

_force_pure = os.environ.get("COOPETITION_PURE", "") not in ("", "0")

if compiled_kernels is not None and not _force_pure:
    impl = compiled_kernels
    BACKEND = "cython"
else:
    impl = _pykernels
    BACKEND = "python"


def get(backend: str | None = None):
    """Kernel module for ``backend`` ('cython', 'python', or None for the active one)."""
    if backend is None:
        return impl
    if backend == "python":
        return _pykernels
    if backend == "cython":
        if compiled_kernels is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return compiled_kernels
    raise ValueError(f"unknown backend {backend!r}")
