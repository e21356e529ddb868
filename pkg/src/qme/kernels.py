"""Kernel dispatch: compiled extension when importable, numpy fallback otherwise.

Set ``QME_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"

if os.environ.get("QME_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

expm = _impl.expm
magnus_trial = _impl.magnus_trial

__all__ = ["BACKEND", "expm", "magnus_trial"]
