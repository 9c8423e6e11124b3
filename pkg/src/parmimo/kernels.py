"""Kernel backend selection.

Importing this module picks the compiled core (``parmimo._kernels``) when
it is importable and falls back to ``parmimo._fallback`` otherwise. Set
``PARMIMO_PURE_PYTHON=1`` to force the fallback.
"""

import os

from parmimo import _fallback

try:
    if os.environ.get("PARMIMO_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from parmimo import _kernels as _impl

    BACKEND = "compiled"
except ImportError:
    _impl = _fallback
    BACKEND = "python"

linf_threshold = _impl.linf_threshold
fitra_dense = _impl.fitra_dense
viterbi_decode = _impl.viterbi_decode
truncation_step = _impl.truncation_step

__all__ = ["BACKEND", "linf_threshold", "fitra_dense", "truncation_step", "viterbi_decode"]
