"""Hot-kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set FRANNEAL_PURE_PYTHON=1 to force the fallback (useful for benchmarking).
"""

from __future__ import annotations

import os

from . import _fallback

if os.environ.get("FRANNEAL_PURE_PYTHON") == "1":
    _impl = _fallback
    BACKEND = "fallback"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "fallback"

causal_convolve = _impl.causal_convolve
linear_recursion = _impl.linear_recursion

__all__ = ["causal_convolve", "linear_recursion", "BACKEND"]
