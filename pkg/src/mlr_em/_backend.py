"""Pick the compiled kernels when importable, else the NumPy fallback.

Set ``MLR_EM_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def available():
    """Mapping of backend name to kernel module for every importable backend."""
    out = {"python": _pykernels}
    if _ckernels is not None:
        out["cython"] = _ckernels
    return out


if os.environ.get("MLR_EM_PURE_PYTHON") == "1" or _ckernels is None:
    kernels = _pykernels
else:
    kernels = _ckernels

BACKEND = kernels.BACKEND
