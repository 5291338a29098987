"""Object-proposal evaluation and partial-annotation gameability diagnostics."""
from .geometry import BoundingBox, ScoredBox, area, iou, nms
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BoundingBox", "ScoredBox", "area", "iou", "nms", "BACKEND", "__version__"]
