"""Kernel backend selection: compiled extension if available, numpy fallback.

Set HYBRIDCORR_PURE_PYTHON=1 to force the fallback (used by the kernel
benchmark and the parity tests).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("HYBRIDCORR_PURE_PYTHON"):
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_py


def backend_name() -> str:
    """'compiled' when the Cython extension is active, else 'python'."""
    return kernels.BACKEND


def available_backends() -> dict[str, object]:
    """All importable kernel modules, keyed by backend name."""
    out = {_kernels_py.BACKEND: _kernels_py}
    try:
        from . import _kernels

        out[_kernels.BACKEND] = _kernels
    except ImportError:
        pass
    return out
