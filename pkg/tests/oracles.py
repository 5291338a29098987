"""Brute-force reference implementations used as test oracles.

Nothing here imports the package's metric or kernel code; everything is
plain loops over the defining formulas.
"""
import numpy as np


def raster_iou(a, b):
    """IOU of integer-coordinate boxes by counting unit pixel cells."""
    x0 = int(min(a[0], b[0]))
    y0 = int(min(a[1], b[1]))
    x1 = int(max(a[2], b[2]))
    y1 = int(max(a[3], b[3]))
    xs = np.arange(x0, x1)[None, :]
    ys = np.arange(y0, y1)[:, None]
    in_a = (xs >= a[0]) & (xs < a[2]) & (ys >= a[1]) & (ys < a[3])
    in_b = (xs >= b[0]) & (xs < b[2]) & (ys >= b[1]) & (ys < b[3])
    union = np.count_nonzero(in_a | in_b)
    return np.count_nonzero(in_a & in_b) / union


def ref_iou(a, b):
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / ((a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter)


def ref_nms(items, threshold):
    """``items``: list of (box tuple, score, rank). Exhaustive greedy reference."""
    remaining = sorted(items, key=lambda it: (-it[1], it[2]))
    kept = []
    while remaining:
        top = remaining.pop(0)
        kept.append(top)
        remaining = [it for it in remaining if not ref_iou(top[0], it[0]) > threshold]
    return kept


def ref_best_overlaps(gt_by_image, props_by_image, budgets):
    """``gt_by_image``: {image: [(inst_id, cat, box)]}; ``props_by_image``: {image: [(box, score, rank)]}.

    Returns {inst_id: {M: best}} and {inst_id: cat}.
    """
    best, cats = {}, {}
    for image, gts in gt_by_image.items():
        ranked = sorted(props_by_image.get(image, []), key=lambda it: (-it[1], it[2]))
        for inst_id, cat, box in gts:
            cats[inst_id] = cat
            best[inst_id] = {}
            for m in budgets:
                v = 0.0
                for pbox, _, _ in ranked[:m]:
                    o = ref_iou(box, pbox)
                    if o > v:
                        v = o
                best[inst_id][m] = v
    return best, cats


def ref_recall(values, t, strict=True):
    if not values:
        return 0.0
    hit = 0
    for v in values:
        if (v > t) if strict else (v >= t):
            hit += 1
    return hit / len(values)


def ref_trapezoid(xs, ys):
    total = 0.0
    for i in range(1, len(xs)):
        total += (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]) / 2.0
    return total


def ref_auc(values, lo=0.5, hi=1.0, step=0.05, strict=True):
    n = int(round((hi - lo) / step))
    ts = [round(lo + k * (hi - lo) / n, 12) for k in range(n + 1)]
    return ref_trapezoid(ts, [ref_recall(values, t, strict) for t in ts]) / (hi - lo)


def ref_abo(values):
    return sum(values) / len(values) if values else 0.0


def ref_mabo(values_by_cat):
    per = [ref_abo(v) for v in values_by_cat.values() if v]
    return sum(per) / len(per) if per else 0.0


def fine_mean_recall(values, lo, hi, step=1e-4, strict=True):
    """Trapezoid of recall(t) on a fine grid over [lo, hi], normalized."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return 0.0
    n = int(round((hi - lo) / step))
    ts = lo + (hi - lo) * np.arange(n + 1) / n
    hits = (v[None, :] > ts[:, None]) if strict else (v[None, :] >= ts[:, None])
    r = hits.mean(axis=1)
    return float(np.sum(np.diff(ts) * (r[1:] + r[:-1]) / 2.0) / (hi - lo))


def fine_ar(values, strict=True):
    return fine_mean_recall(values, 0.5, 1.0, strict=strict)


def fine_vus(values_by_budget, budgets, t_lo, t_hi, log_axis=True, strict=True):
    xs = [float(np.log(m)) if log_axis else float(m) for m in budgets]
    ys = [fine_mean_recall(values_by_budget[m], t_lo, t_hi, strict=strict) for m in budgets]
    return ref_trapezoid(xs, ys) / (xs[-1] - xs[0])
