"""Backend selection for the box-overlap kernels.

The compiled extension is used when it was built; otherwise the numpy
fallback is loaded. Setting ``PROPEVAL_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("PROPEVAL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

iou_matrix = _impl.iou_matrix
best_overlap_batch = _impl.best_overlap_batch
nms_keep = _impl.nms_keep


def get_backend(name):
    """Return the kernel module for ``name`` ("cython" or "python")."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
