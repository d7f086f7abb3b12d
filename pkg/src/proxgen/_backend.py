"""Pick the compiled kernels when importable, else the numpy fallback.

Set ``PROXGEN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

kernels = _kernels_py
compiled = None

try:
    from . import _kernels as compiled
except ImportError:
    compiled = None

if compiled is not None and not os.environ.get("PROXGEN_PURE_PYTHON"):
    kernels = compiled

BACKEND = kernels.BACKEND
