"""Kernel backend selection.

Imports the compiled Cython extension when present, otherwise the numpy
fallback.  Set COMANIP_PURE=1 to force the fallback (used by the backend
benchmark and equivalence tests).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("COMANIP_PURE", "") == "1":
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_py

BACKEND: str = kernels.BACKEND


def available_backends():
    """All importable kernel backends, compiled one first."""
    out = []
    try:
        from . import _kernels

        out.append(_kernels)
    except ImportError:
        pass
    out.append(_kernels_py)
    return out
