"""Kernel backend selection.

The compiled extension is preferred; the numpy fallback is used when the
extension is missing or when ZZEDIT_PURE_PYTHON is set to a non-empty value.
``BACKEND`` records which one is active.
"""

from __future__ import annotations

import os

from . import _fallback

if os.environ.get("ZZEDIT_PURE_PYTHON"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _gmmcore as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

gmm_epsilon = _impl.gmm_epsilon
gmm_log_density = _impl.gmm_log_density
gmm_path = _impl.gmm_path

__all__ = ["BACKEND", "gmm_epsilon", "gmm_log_density", "gmm_path"]
