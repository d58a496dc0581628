"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``INTERLIMIT_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels
if os.environ.get("INTERLIMIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

project_points = _impl.project_points
contour_length_area = _impl.contour_length_area
