"""Kernel backend selection.

Imports the compiled extension when available and falls back to the
pure numpy twin otherwise.  Both produce bit-identical results; the
environment variable SKNAP_BACKEND forces one explicitly:

    SKNAP_BACKEND=compiled   require the extension, fail if missing
    SKNAP_BACKEND=python     ignore the extension
"""

import os

_requested = os.environ.get("SKNAP_BACKEND", "").strip().lower()

if _requested not in ("", "compiled", "python"):
    raise ImportError(
        f"unknown SKNAP_BACKEND value {_requested!r}; use 'compiled' or 'python'")

if _requested == "python":
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels_cy as kernels  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _kernels_py as kernels

BACKEND = kernels.backend_name()
