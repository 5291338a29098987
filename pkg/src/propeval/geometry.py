"""Axis-aligned boxes, intersection-over-union and greedy NMS.

Boxes use continuous, half-open pixel coordinates: a box covers
``[x_min, x_max) x [y_min, y_max)`` and its area is ``width * height`` with
no inclusive "+1" correction. Legacy inclusive conventions are converted by
the parsers in :mod:`propeval.data_model`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels


class InvalidBoxError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise InvalidBoxError(f"non-finite box coordinates {coords}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise InvalidBoxError(f"box has no positive area: {coords}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def clip(self, width: float, height: float) -> BoundingBox:
        """Clip to ``[0, width] x [0, height]``; raises if nothing is left."""
        return BoundingBox(
            max(self.x_min, 0.0), max(self.y_min, 0.0),
            min(self.x_max, float(width)), min(self.y_max, float(height)),
        )


@dataclass(frozen=True)
class ScoredBox:
    box: BoundingBox
    score: float
    source_rank: int = 0

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise InvalidBoxError(f"non-finite score {self.score!r}")
        if self.source_rank < 0:
            raise InvalidBoxError(f"negative source_rank {self.source_rank}")


def area(b: BoundingBox) -> float:
    return (b.x_max - b.x_min) * (b.y_max - b.y_min)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over union area; 0 for disjoint or touching boxes."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    if iw <= 0.0:
        return 0.0
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (area(a) + area(b) - inter)


def boxes_to_array(boxes: Sequence[BoundingBox]) -> np.ndarray:
    if not boxes:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64)


def validate_box_array(arr: np.ndarray) -> np.ndarray:
    """Check an (N, 4) array row-wise against the box invariants.

    Returns a C-contiguous float64 copy. Raises :class:`InvalidBoxError`
    naming the first offending row.
    """
    arr = np.ascontiguousarray(arr, dtype=np.float64).reshape(-1, 4)
    bad = ~np.isfinite(arr).all(axis=1)
    bad |= ~(arr[:, 2] > arr[:, 0])
    bad |= ~(arr[:, 3] > arr[:, 1])
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise InvalidBoxError(f"row {row}: invalid box {arr[row].tolist()}")
    return arr


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IOU of two (N, 4) / (K, 4) coordinate arrays."""
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    return kernels.iou_matrix(a, b)


def priority_order(scores, ranks) -> np.ndarray:
    """Indices sorting by descending score, ties by ascending source rank."""
    return np.lexsort((np.asarray(ranks), -np.asarray(scores, dtype=np.float64)))


def nms_indices(boxes, scores, ranks, iou_threshold: float) -> np.ndarray:
    """Array form of :func:`nms`; returns kept indices in output order."""
    if not 0.0 <= iou_threshold < 1.0:
        raise ValueError(f"iou_threshold must lie in [0, 1), got {iou_threshold}")
    boxes = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    if boxes.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    order = priority_order(scores, ranks)
    keep = kernels.nms_keep(np.ascontiguousarray(boxes[order]), float(iou_threshold))
    return order[np.asarray(keep)]


def nms(boxes: Sequence[ScoredBox], iou_threshold: float) -> list[ScoredBox]:
    """Greedy non-maximum suppression.

    The highest-scoring surviving box is kept and every remaining box with
    IOU strictly greater than ``iou_threshold`` against it is dropped. Equal
    scores are broken by lower ``source_rank``. The result is sorted by
    descending score.
    """
    boxes = list(boxes)
    if not boxes:
        if not 0.0 <= iou_threshold < 1.0:
            raise ValueError(f"iou_threshold must lie in [0, 1), got {iou_threshold}")
        return []
    keep = nms_indices(
        boxes_to_array([sb.box for sb in boxes]),
        [sb.score for sb in boxes],
        [sb.source_rank for sb in boxes],
        iou_threshold,
    )
    return [boxes[i] for i in keep]
