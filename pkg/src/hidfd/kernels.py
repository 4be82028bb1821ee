"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``HIDFD_BACKEND=python`` to force the fallback.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("HIDFD_BACKEND", "").lower() not in ("python", "py", "numpy"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def matmul(a, b):
    return _impl.matmul(_c(a), _c(b))


def log_softmax(a):
    return _impl.log_softmax(_c(a))


def row_sqdist(a, b):
    return _impl.row_sqdist(_c(a), _c(b))


def backends():
    """Return ``{name: module}`` for every importable backend."""
    found = {"python": _pykernels}
    try:
        from . import _kernels
        found["cython"] = _kernels
    except ImportError:
        pass
    return found
