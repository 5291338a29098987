# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for box overlap computations.

Every function here has a numpy twin in :mod:`propeval._pykernels` with the
same signature and the same floating-point operation order, so both backends
produce bit-identical results.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline double _iou(const double[:, ::1] a, Py_ssize_t i,
                        const double[:, ::1] b, Py_ssize_t j) noexcept nogil:
    cdef double iw, ih, inter, area_a, area_b
    iw = (a[i, 2] if a[i, 2] < b[j, 2] else b[j, 2]) - (a[i, 0] if a[i, 0] > b[j, 0] else b[j, 0])
    if iw <= 0.0:
        return 0.0
    ih = (a[i, 3] if a[i, 3] < b[j, 3] else b[j, 3]) - (a[i, 1] if a[i, 1] > b[j, 1] else b[j, 1])
    if ih <= 0.0:
        return 0.0
    inter = iw * ih
    area_a = (a[i, 2] - a[i, 0]) * (a[i, 3] - a[i, 1])
    area_b = (b[j, 2] - b[j, 0]) * (b[j, 3] - b[j, 1])
    return inter / (area_a + area_b - inter)


def iou_matrix(const double[:, ::1] a, const double[:, ::1] b):
    """Pairwise IOU between the rows of ``a`` (N, 4) and ``b`` (K, 4)."""
    cdef Py_ssize_t n = a.shape[0], k = b.shape[0], i, j
    out = np.zeros((n, k), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(k):
                o[i, j] = _iou(a, i, b, j)
    return out


def best_overlap_batch(const double[:, ::1] gt, const cnp.int64_t[::1] gt_offsets,
                       const double[:, ::1] props, const cnp.int64_t[::1] prop_offsets,
                       const cnp.int64_t[::1] budgets, double[:, ::1] out,
                       Py_ssize_t image_lo, Py_ssize_t image_hi):
    """Fill ``out[g, b]`` with the best IOU of GT row ``g`` over the top
    ``budgets[b]`` proposals of its image, for images in ``[image_lo, image_hi)``.

    Rows of ``out`` belonging to other images are left untouched, so disjoint
    image ranges can be processed concurrently.
    """
    cdef Py_ssize_t nb = budgets.shape[0]
    cdef Py_ssize_t im, g, p, bi, p0, p1, limit
    cdef double best, v
    with nogil:
        for im in range(image_lo, image_hi):
            p0 = prop_offsets[im]
            p1 = prop_offsets[im + 1]
            for g in range(gt_offsets[im], gt_offsets[im + 1]):
                best = 0.0
                p = p0
                for bi in range(nb):
                    limit = p0 + budgets[bi]
                    if limit > p1:
                        limit = p1
                    while p < limit:
                        v = _iou(gt, g, props, p)
                        if v > best:
                            best = v
                        p += 1
                    out[g, bi] = best


def nms_keep(const double[:, ::1] boxes, double threshold):
    """Greedy suppression over rows already in priority order.

    Returns the kept row indices in order.
    """
    cdef Py_ssize_t n = boxes.shape[0], i, j
    alive = np.ones(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] al = alive
    keep = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] kp = keep
    cdef Py_ssize_t nk = 0
    with nogil:
        for i in range(n):
            if not al[i]:
                continue
            kp[nk] = i
            nk += 1
            for j in range(i + 1, n):
                if al[j] and _iou(boxes, i, boxes, j) > threshold:
                    al[j] = 0
    return keep[:nk]
