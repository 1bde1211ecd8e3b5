"""Backend selection for the hot kernels.

The compiled extension is used when it imports; set ``CROSSCTL_PURE_PYTHON=1`` to force the
pure-Python fallback.
"""
import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("CROSSCTL_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND_NAME = "cython" if backend is compiled_backend else "python"

crossing_upper = backend.crossing_upper
crossing_lower = backend.crossing_lower
rear_end_upper = backend.rear_end_upper
rear_end_hold_guard = backend.rear_end_hold_guard
assemble = backend.assemble
clamp = backend.clamp
min_gap = backend.min_gap
profile_ok = backend.profile_ok
