"""Reference proposal generators.

``random_proposer`` and ``sliding_window_proposer`` are category-blind
controls. ``oracle_dmp`` emulates a class-specific detector used as a
proposal generator: noisy detections of the ground truth of a set of "seen"
categories, merge-sorted by score, suppressed with NMS and cut to the top M.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .data_model import Dataset, ImageProposals, ProposalSet
from .geometry import iou_matrix, nms_indices
from .synth import image_rng

# stage keys of the per-image random streams
_HIT, _JITTER, _SCORE, _FALSE_POS = 0, 1, 2, 3
SCORE_NOISE = 0.01
FALSE_POSITIVE_MAX_SCORE = 0.1


class ProposerError(ValueError):
    pass


def _random_boxes(rng: np.random.Generator, n: int, W: float, H: float,
                  min_side: float = 0.05, max_side: float = 0.8):
    """``n`` boxes with uniform centers and log-uniform sides, kept inside the image.

    Half-sizes are shrunk to fit around the center, so the center
    distribution stays exactly uniform.
    """
    u = np.clip(rng.random((n, 2)), 1e-9, 1.0 - 1e-9)
    centers = u * (W, H)
    log_side = rng.uniform(math.log(min_side), math.log(max_side), size=(n, 2))
    half = 0.5 * np.exp(log_side) * (W, H)
    half = np.minimum(half, np.minimum(centers, (W, H) - centers))
    return np.hstack([centers - half, centers + half])


def random_proposer(d: Dataset, per_image: int, seed: int = 0, min_side: float = 0.05,
                    max_side: float = 0.8, method_name: str = "random") -> ProposalSet:
    """Uniformly placed random boxes with i.i.d. uniform scores."""
    if per_image <= 0:
        raise ProposerError(f"per_image must be positive, got {per_image}")
    if not 0 < min_side <= max_side <= 1:
        raise ProposerError("need 0 < min_side <= max_side <= 1")
    arrays = {}
    for i, image_id in enumerate(d.image_ids):
        im = d.image_by_id[image_id]
        rng = image_rng(seed, i)
        boxes = _random_boxes(rng, per_image, im.width, im.height, min_side, max_side)
        arrays[image_id] = (boxes, rng.random(per_image))
    return ProposalSet.from_arrays(method_name, arrays)


def window_grid(width: float, height: float, scales, aspect_ratios, stride_fraction: float) -> np.ndarray:
    """Sliding windows ordered by (scale, ratio, y, x), clipped to the image.

    A window at ``scale`` s and ratio r is ``s * width * sqrt(r)`` wide and
    ``s * height / sqrt(r)`` tall; the stride is ``stride_fraction`` of the
    window size along each axis.
    """
    rows = []
    for s in scales:
        for r in aspect_ratios:
            w = s * width * math.sqrt(r)
            h = s * height / math.sqrt(r)
            nx = _positions(width, w, stride_fraction * w)
            ny = _positions(height, h, stride_fraction * h)
            for y in ny:
                for x in nx:
                    rows.append((max(x, 0.0), max(y, 0.0), min(x + w, width), min(y + h, height)))
    return np.array(rows, dtype=np.float64).reshape(-1, 4)


def _positions(extent: float, size: float, stride: float) -> list[float]:
    if size >= extent:
        return [0.0]
    n = int(math.floor((extent - size) / stride + 1e-9)) + 1
    return [k * stride for k in range(n)]


def window_count(width: float, height: float, scales, aspect_ratios, stride_fraction: float) -> int:
    total = 0
    for s in scales:
        for r in aspect_ratios:
            w, h = s * width * math.sqrt(r), s * height / math.sqrt(r)
            total += len(_positions(width, w, stride_fraction * w)) * len(_positions(height, h, stride_fraction * h))
    return total


def sliding_window_proposer(d: Dataset, scales, aspect_ratios, stride_fraction: float,
                            method_name: str = "sliding_window") -> ProposalSet:
    scales, aspect_ratios = list(scales), list(aspect_ratios)
    if not scales or not aspect_ratios:
        raise ProposerError("scales and aspect_ratios must be non-empty")
    if any(s <= 0 for s in scales) or any(r <= 0 for r in aspect_ratios):
        raise ProposerError("scales and aspect_ratios must be positive")
    if not 0 < stride_fraction <= 1:
        raise ProposerError("stride_fraction must lie in (0, 1]")
    arrays = {}
    for image_id in d.image_ids:
        im = d.image_by_id[image_id]
        boxes = window_grid(im.width, im.height, scales, aspect_ratios, stride_fraction)
        keep = (boxes[:, 2] > boxes[:, 0]) & (boxes[:, 3] > boxes[:, 1])
        boxes = boxes[keep]
        arrays[image_id] = (boxes, np.zeros(len(boxes)))
    return ProposalSet.from_arrays(method_name, arrays)


@dataclass(frozen=True)
class DmpConfig:
    seen_categories: frozenset[int] = field(default_factory=frozenset)
    hit_rate: float = 0.9
    jitter_sigma: float = 0.05
    false_positive_rate: float = 5.0
    nms_threshold: float = 0.5
    budget: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seen_categories", frozenset(int(c) for c in self.seen_categories))
        if not 0 <= self.hit_rate <= 1:
            raise ProposerError("hit_rate must lie in [0, 1]")
        if self.jitter_sigma < 0 or self.false_positive_rate < 0:
            raise ProposerError("jitter_sigma and false_positive_rate must be non-negative")
        if not 0 <= self.nms_threshold < 1:
            raise ProposerError("nms_threshold must lie in [0, 1)")
        if self.budget < 1:
            raise ProposerError("budget must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seen_categories"] = sorted(self.seen_categories)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> DmpConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ProposerError(f"unknown dmp config keys {sorted(unknown)}")
        return cls(**d)

    def with_seen(self, seen) -> DmpConfig:
        return DmpConfig.from_dict({**self.to_dict(), "seen_categories": frozenset(seen)})


def _dmp_image(d: Dataset, index: int, image_id: str, cfg: DmpConfig) -> ImageProposals | None:
    im = d.image_by_id[image_id]
    W, H = im.width, im.height
    insts = d.instances_by_image[image_id]
    n = len(insts)
    # every instance consumes draws whether seen or not, so growing the seen
    # set only adds detections and never reshuffles the others
    hit_u = image_rng(cfg.seed, index, _HIT).random(n)
    noise = image_rng(cfg.seed, index, _JITTER).standard_normal((n, 4))
    score_noise = image_rng(cfg.seed, index, _SCORE).standard_normal(n)

    per_category: dict[int, list[tuple[float, tuple]]] = {}
    for k, g in enumerate(insts):
        if g.category_id not in cfg.seen_categories or not hit_u[k] < cfg.hit_rate:
            continue
        b = g.box
        sides = np.array([b.width, b.height, b.width, b.height])
        x0, y0, x1, y1 = np.array(b.as_tuple()) + cfg.jitter_sigma * sides * noise[k]
        x0, y0, x1, y1 = max(x0, 0.0), max(y0, 0.0), min(x1, W), min(y1, H)
        if not (x1 > x0 and y1 > y0):
            continue
        det = (float(x0), float(y0), float(x1), float(y1))
        score = float(iou_matrix([det], [b.as_tuple()])[0, 0]) + SCORE_NOISE * score_noise[k]
        per_category.setdefault(g.category_id, []).append((score, det))

    fp_rng = image_rng(cfg.seed, index, _FALSE_POS)
    n_fp = int(fp_rng.poisson(cfg.false_positive_rate)) if cfg.false_positive_rate > 0 else 0
    if n_fp:
        boxes = _random_boxes(fp_rng, n_fp, W, H)
        scores = fp_rng.random(n_fp) * FALSE_POSITIVE_MAX_SCORE
        per_category[-1] = [(float(s), tuple(map(float, bx))) for s, bx in zip(scores, boxes)]

    lists = [sorted(v, key=lambda e: -e[0]) for _, v in sorted(per_category.items())]
    merged = list(heapq.merge(*lists, key=lambda e: -e[0]))
    if not merged:
        return None
    boxes = np.array([e[1] for e in merged], dtype=np.float64)
    scores = np.array([e[0] for e in merged], dtype=np.float64)
    ranks = np.arange(len(merged), dtype=np.int64)
    keep = nms_indices(boxes, scores, ranks, cfg.nms_threshold)[: cfg.budget]
    return ImageProposals(boxes[keep], scores[keep], ranks[keep])


def oracle_dmp(full: Dataset, cfg: DmpConfig, method_name: str = "oracle_dmp") -> ProposalSet:
    """Detector-as-proposer emulation driven by the ground truth of ``full``."""
    unknown = cfg.seen_categories - set(full.category_by_id)
    if unknown:
        raise ProposerError(f"seen_categories contains unknown ids {sorted(unknown)}")
    out = {}
    for i, image_id in enumerate(full.image_ids):
        ip = _dmp_image(full, i, image_id, cfg)
        if ip is not None:
            out[image_id] = ip
    return ProposalSet(method_name, out)
