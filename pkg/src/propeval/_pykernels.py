"""Pure numpy implementations of the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def _pairwise_iou(a, b):
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.where((iw > 0.0) & (ih > 0.0), iw * ih, 0.0)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = inter / union
    out[inter == 0.0] = 0.0
    return out


def iou_matrix(a, b):
    """Pairwise IOU between the rows of ``a`` (N, 4) and ``b`` (K, 4)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]), dtype=np.float64)
    return _pairwise_iou(a, b)


def best_overlap_batch(gt, gt_offsets, props, prop_offsets, budgets, out, image_lo, image_hi):
    budgets = np.asarray(budgets, dtype=np.int64)
    max_budget = int(budgets[-1]) if budgets.size else 0
    for im in range(image_lo, image_hi):
        g0, g1 = gt_offsets[im], gt_offsets[im + 1]
        if g0 == g1:
            continue
        p0 = prop_offsets[im]
        p1 = min(prop_offsets[im + 1], p0 + max_budget)
        if p1 == p0:
            out[g0:g1, :] = 0.0
            continue
        running = np.maximum.accumulate(_pairwise_iou(gt[g0:g1], props[p0:p1]), axis=1)
        cols = np.minimum(budgets, p1 - p0) - 1
        out[g0:g1, :] = running[:, cols]


def nms_keep(boxes, threshold):
    """Greedy suppression over rows already in priority order."""
    boxes = np.asarray(boxes, dtype=np.float64)
    n = boxes.shape[0]
    alive = np.ones(n, dtype=bool)
    keep = []
    for i in range(n):
        if not alive[i]:
            continue
        keep.append(i)
        rest = np.flatnonzero(alive[i + 1:]) + i + 1
        if rest.size:
            ov = _pairwise_iou(boxes[i:i + 1], boxes[rest])[0]
            alive[rest[ov > threshold]] = False
    return np.asarray(keep, dtype=np.int64)
