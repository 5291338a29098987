"""Proposal-recall metrics built on a best-overlap table.

Every metric is a reduction of one table: for each ground-truth instance and
each proposal budget ``M``, the best IOU reached by the top-``M`` proposals of
its image. Computing that table is the only expensive step; see
:func:`best_overlaps`.
"""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .data_model import Dataset, ProposalSet
from .geometry import iou_matrix

log = logging.getLogger(__name__)

STRICT = "strict_greater"
GREATER_EQUAL = "greater_equal"
COMPARISONS = (STRICT, GREATER_EQUAL)

DEFAULT_BUDGETS = (1, 3, 10, 32, 100, 316, 1000, 3162, 10000)
DEFAULT_THRESHOLDS = tuple(round(0.5 + 0.05 * k, 2) for k in range(11))
AR_RANGE = (0.5, 1.0)


class MetricError(ValueError):
    pass


class EmptyGroundTruthWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EvaluationConfig:
    iou_thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    proposal_budgets: tuple[int, ...] = DEFAULT_BUDGETS
    threshold_comparison: str = STRICT
    auc_threshold_range: tuple[float, float] = (0.5, 1.0)
    auc_grid_step: float = 0.05
    ar_grid_step: float = 0.01
    budget_axis: str = "log"
    matching: str = "independent"
    report_thresholds: tuple[float, ...] = (0.5, 0.7)

    def __post_init__(self):
        object.__setattr__(self, "iou_thresholds", tuple(float(t) for t in self.iou_thresholds))
        object.__setattr__(self, "proposal_budgets", tuple(int(m) for m in self.proposal_budgets))
        object.__setattr__(self, "auc_threshold_range", tuple(float(t) for t in self.auc_threshold_range))
        object.__setattr__(self, "report_thresholds", tuple(float(t) for t in self.report_thresholds))
        t = self.iou_thresholds
        if not t or any(not 0.0 < x <= 1.0 for x in t) or any(b <= a for a, b in zip(t, t[1:])):
            raise MetricError(f"iou_thresholds must be strictly increasing in (0, 1]: {t}")
        _check_budgets(self.proposal_budgets)
        if self.threshold_comparison not in COMPARISONS:
            raise MetricError(f"threshold_comparison must be one of {COMPARISONS}")
        lo, hi = self.auc_threshold_range
        if not 0.0 < lo < hi <= 1.0:
            raise MetricError(f"auc_threshold_range must satisfy 0 < lo < hi <= 1: {(lo, hi)}")
        if not (self.auc_grid_step > 0 and self.ar_grid_step > 0):
            raise MetricError("grid steps must be positive")
        if self.budget_axis not in ("linear", "log"):
            raise MetricError("budget_axis must be 'linear' or 'log'")
        if self.matching not in ("independent", "one_to_one"):
            raise MetricError("matching must be 'independent' or 'one_to_one'")

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> EvaluationConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise MetricError(f"unknown evaluation config keys {sorted(unknown)}")
        return cls(**d)

    def with_budgets(self, budgets: Iterable[int]) -> EvaluationConfig:
        return EvaluationConfig.from_dict({**self.to_dict(), "proposal_budgets": list(budgets)})


def _check_budgets(budgets):
    if not budgets or any(m < 1 for m in budgets) or any(b <= a for a, b in zip(budgets, budgets[1:])):
        raise MetricError(f"proposal budgets must be strictly increasing positive integers: {budgets}")


def cap_budgets(budgets: Sequence[int], available: int) -> tuple[int, ...]:
    """Drop budgets beyond ``available`` proposals, keeping ``available`` as the last one."""
    kept = [m for m in budgets if m < available]
    if available >= 1:
        kept.append(available)
    return tuple(kept) or (1,)


@dataclass
class CurveResult:
    x_label: str
    y_label: str
    points: list[tuple[float, float]]
    method_name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = [(float(x), float(y)) for x, y in self.points]
        xs = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise MetricError(f"curve x values must be strictly increasing: {xs}")

    @property
    def x(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def y(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def to_dict(self) -> dict:
        return {
            "x_label": self.x_label,
            "y_label": self.y_label,
            "method": self.method_name,
            "metadata": self.metadata,
            "points": [list(p) for p in self.points],
        }


@dataclass
class BestOverlapTable:
    """Best IOU per ground-truth instance (rows) and budget (columns).

    Rows are ordered by image id, then instance id.
    """

    budgets: tuple[int, ...]
    best: np.ndarray
    instance_ids: np.ndarray
    category_ids: np.ndarray
    image_ids: list[str]
    method_name: str = ""
    matching: str = "independent"

    def __len__(self):
        return int(self.best.shape[0])

    def column(self, budget: int) -> np.ndarray:
        try:
            j = self.budgets.index(int(budget))
        except ValueError:
            raise MetricError(f"budget {budget} not materialized (have {list(self.budgets)})") from None
        return self.best[:, j]

    def restrict(self, category_ids: Iterable[int]) -> BestOverlapTable:
        """Rows of the given categories only."""
        mask = np.isin(self.category_ids, np.fromiter(category_ids, dtype=np.int64))
        return BestOverlapTable(
            self.budgets, self.best[mask], self.instance_ids[mask], self.category_ids[mask],
            [i for i, m in zip(self.image_ids, mask) if m], self.method_name, self.matching,
        )


def _pack(d: Dataset, p: ProposalSet, max_budget: int):
    gt, gt_off, inst_ids, cat_ids, row_images = d.gt_arrays
    pr_rows, counts = [], []
    for k, image_id in enumerate(d.image_ids):
        ip = p.get(image_id)
        n = 0
        if ip is not None and gt_off[k + 1] > gt_off[k]:
            n = min(len(ip), max_budget)
            pr_rows.append(ip.boxes[:n])
        counts.append(n)
    pr_off = np.zeros(len(counts) + 1, dtype=np.int64)
    np.cumsum(counts, out=pr_off[1:])
    props = np.ascontiguousarray(np.concatenate(pr_rows) if pr_rows else np.zeros((0, 4)), dtype=np.float64)
    return gt, gt_off, props, pr_off, inst_ids, cat_ids, row_images


def _chunks(offsets: np.ndarray, n_chunks: int) -> list[tuple[int, int]]:
    """Split the image range into contiguous pieces of roughly equal GT count."""
    n_images = len(offsets) - 1
    if n_images == 0:
        return []
    n_chunks = max(1, min(n_chunks, n_images))
    targets = np.linspace(0, offsets[-1], n_chunks + 1)[1:-1]
    cuts = sorted(set([0, *np.searchsorted(offsets[1:], targets, side="left").tolist(), n_images]))
    return [(a, b) for a, b in zip(cuts, cuts[1:]) if b > a]


def best_overlaps(
    d: Dataset,
    p: ProposalSet,
    budgets: Sequence[int],
    threads: int = 1,
    matching: str = "independent",
    backend: str | None = None,
) -> BestOverlapTable:
    """Best IOU of every instance over the top-``M`` proposals of its image.

    One proposal may be the best match for several instances (independent
    max per instance). ``matching="one_to_one"`` instead consumes each
    proposal once, processing instances in descending order of their best
    IOU. Images are split into contiguous ranges for the worker threads and
    each range fills disjoint rows, so the result does not depend on
    ``threads``.
    """
    budgets = tuple(int(m) for m in budgets)
    _check_budgets(budgets)
    unknown = p.unknown_images(d)
    if unknown:
        log.warning("%s: %d proposal images not in dataset ignored", p.method_name, len(unknown))
    gt, gt_off, props, pr_off, inst_ids, cat_ids, row_images = _pack(d, p, budgets[-1])
    out = np.zeros((gt.shape[0], len(budgets)), dtype=np.float64)
    if matching == "one_to_one":
        _one_to_one(gt, gt_off, props, pr_off, budgets, out)
    elif matching == "independent":
        kern = kernels if backend is None else kernels.get_backend(backend)
        b_arr = np.array(budgets, dtype=np.int64)
        chunks = _chunks(gt_off, threads * 4 if threads > 1 else 1)
        if threads <= 1 or len(chunks) <= 1:
            for lo, hi in chunks:
                kern.best_overlap_batch(gt, gt_off, props, pr_off, b_arr, out, lo, hi)
        else:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                list(ex.map(lambda c: kern.best_overlap_batch(gt, gt_off, props, pr_off, b_arr, out, *c), chunks))
    else:
        raise MetricError(f"unknown matching mode {matching!r}")
    return BestOverlapTable(budgets, out, inst_ids, cat_ids, row_images, p.method_name, matching)


def _one_to_one(gt, gt_off, props, pr_off, budgets, out):
    for im in range(len(gt_off) - 1):
        g0, g1, p0, p1 = gt_off[im], gt_off[im + 1], pr_off[im], pr_off[im + 1]
        if g0 == g1 or p0 == p1:
            continue
        full = iou_matrix(gt[g0:g1], props[p0:p1])
        for j, m in enumerate(budgets):
            ov = full[:, : min(m, p1 - p0)].copy()
            order = np.argsort(-ov.max(axis=1), kind="stable")
            for g in order:
                k = int(np.argmax(ov[g]))
                out[g0 + g, j] = ov[g, k]
                if ov[g, k] > 0:
                    ov[:, k] = -1.0
            np.maximum(out[g0:g1, j], 0.0, out=out[g0:g1, j])


# --------------------------------------------------------------------------
# Reductions


def _empty(what: str) -> float:
    warnings.warn(f"{what}: no ground-truth instances; reporting 0", EmptyGroundTruthWarning, stacklevel=3)
    return 0.0


def _hits(col: np.ndarray, t: float, comparison: str) -> np.ndarray:
    if comparison == STRICT:
        return col > t
    if comparison == GREATER_EQUAL:
        return col >= t
    raise MetricError(f"unknown comparison {comparison!r}")


def recall_at(table: BestOverlapTable, t: float, M: int, comparison: str = STRICT) -> float:
    """Fraction of instances whose best IOU within the top ``M`` exceeds ``t``."""
    col = table.column(M)
    if col.size == 0:
        return _empty("recall")
    return int(np.count_nonzero(_hits(col, t, comparison))) / col.size


def _cfg(cfg):
    return cfg if cfg is not None else EvaluationConfig()


def recall_vs_budget(table: BestOverlapTable, t: float, cfg: EvaluationConfig | None = None) -> CurveResult:
    cfg = _cfg(cfg)
    pts = [(m, recall_at(table, t, m, cfg.threshold_comparison)) for m in table.budgets]
    return CurveResult("proposals", f"recall@{t:g}", pts, table.method_name,
                       {"iou_threshold": t, "comparison": cfg.threshold_comparison})


def recall_vs_threshold(table: BestOverlapTable, M: int, cfg: EvaluationConfig | None = None) -> CurveResult:
    cfg = _cfg(cfg)
    pts = [(t, recall_at(table, t, M, cfg.threshold_comparison)) for t in cfg.iou_thresholds]
    return CurveResult("iou_threshold", "recall", pts, table.method_name,
                       {"budget": M, "comparison": cfg.threshold_comparison})


def threshold_grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = max(1, int(round((hi - lo) / step)))
    return np.round(lo + (hi - lo) * np.arange(n + 1) / n, 12)


def trapezoid(y, x) -> float:
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        return 0.0
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) * 0.5))


def auc(table: BestOverlapTable, M: int, cfg: EvaluationConfig | None = None) -> float:
    """Area under recall-vs-threshold at budget ``M``, normalized to [0, 1].

    Trapezoidal rule on the AUC grid (default thresholds 0.5, 0.55, ..., 1.0)
    divided by the width of the range.
    """
    cfg = _cfg(cfg)
    col = table.column(M)
    if col.size == 0:
        return _empty("auc")
    lo, hi = cfg.auc_threshold_range
    grid = threshold_grid(lo, hi, cfg.auc_grid_step)
    r = [np.count_nonzero(_hits(col, t, cfg.threshold_comparison)) / col.size for t in grid]
    return trapezoid(r, grid) / (hi - lo)


def auc_vs_budget(table: BestOverlapTable, cfg: EvaluationConfig | None = None) -> CurveResult:
    cfg = _cfg(cfg)
    pts = [(m, auc(table, m, cfg)) for m in table.budgets]
    return CurveResult("proposals", "auc", pts, table.method_name,
                       {"auc_threshold_range": list(cfg.auc_threshold_range),
                        "auc_grid_step": cfg.auc_grid_step, "comparison": cfg.threshold_comparison})


def abo(table: BestOverlapTable, M: int, category: int | None = None) -> float:
    """Average best overlap, over all instances or those of one category."""
    col = table.column(M)
    if category is not None:
        col = col[table.category_ids == category]
    if col.size == 0:
        return _empty("abo")
    return float(np.mean(col))


def mabo(table: BestOverlapTable, M: int) -> float:
    """Unweighted mean of per-category ABO over categories that have instances."""
    cats = np.unique(table.category_ids)
    if cats.size == 0:
        return _empty("mabo")
    return float(np.mean([abo(table, M, int(c)) for c in cats]))


def mean_recall_over_thresholds(col: np.ndarray, lo: float, hi: float) -> float:
    """Exact mean of recall(t) for t uniform on [lo, hi].

    Recall is a step function of t, so its integral is the sum of each
    instance's overlap beyond ``lo`` capped at the range width. The strict
    and non-strict comparisons differ only on a null set and give the same
    value.
    """
    return float(np.mean(np.clip(col - lo, 0.0, hi - lo)) / (hi - lo))


def average_recall(table: BestOverlapTable, M: int, cfg: EvaluationConfig | None = None) -> float:
    """Mean recall over IOU thresholds in [0.5, 1], integrated exactly."""
    col = table.column(M)
    if col.size == 0:
        return _empty("average recall")
    return mean_recall_over_thresholds(col, *AR_RANGE)


def average_recall_grid(table: BestOverlapTable, M: int, cfg: EvaluationConfig | None = None) -> float:
    """Trapezoidal AR on the ``ar_grid_step`` threshold grid.

    Converges to :func:`average_recall` as the step shrinks; the error is at
    most half a step per instance.
    """
    cfg = _cfg(cfg)
    col = table.column(M)
    if col.size == 0:
        return _empty("average recall")
    grid = threshold_grid(*AR_RANGE, cfg.ar_grid_step)
    r = [np.count_nonzero(_hits(col, t, cfg.threshold_comparison)) / col.size for t in grid]
    return trapezoid(r, grid) / (AR_RANGE[1] - AR_RANGE[0])


def ar_vs_budget(table: BestOverlapTable, cfg: EvaluationConfig | None = None) -> CurveResult:
    pts = [(m, average_recall(table, m, cfg)) for m in table.budgets]
    return CurveResult("proposals", "average_recall", pts, table.method_name,
                       {"iou_range": list(AR_RANGE), "integration": "exact"})


def mabo_vs_budget(table: BestOverlapTable) -> CurveResult:
    pts = [(m, mabo(table, m)) for m in table.budgets]
    return CurveResult("proposals", "mabo", pts, table.method_name, {})


def budget_positions(budgets: Sequence[int], axis: str) -> np.ndarray:
    b = np.asarray(budgets, dtype=np.float64)
    return np.log(b) if axis == "log" else b


def surface_volume(values: np.ndarray, t_axis: Sequence[float], m_axis: Sequence[float]) -> float:
    """Normalized double trapezoid of ``values[t, m]`` over the two axes."""
    values = np.asarray(values, dtype=np.float64)
    t_axis = np.asarray(t_axis, dtype=np.float64)
    m_axis = np.asarray(m_axis, dtype=np.float64)
    if t_axis.size < 2 or m_axis.size < 2:
        raise MetricError("surface integration needs at least 2 samples on each axis")
    inner = [trapezoid(values[:, j], t_axis) for j in range(m_axis.size)]
    return trapezoid(inner, m_axis) / ((t_axis[-1] - t_axis[0]) * (m_axis[-1] - m_axis[0]))


def vus(table: BestOverlapTable, cfg: EvaluationConfig | None = None, t_integration: str = "exact") -> float:
    """Volume under the recall surface over thresholds x budgets, in [0, 1].

    The threshold range is spanned by the configured thresholds and the
    budget axis is linear or log per ``cfg.budget_axis``. Along thresholds the
    recall is integrated exactly by default; ``t_integration="grid"`` uses
    the trapezoid on the configured thresholds instead.
    """
    cfg = _cfg(cfg)
    thr = cfg.iou_thresholds
    if len(table.budgets) < 2 or len(thr) < 2:
        raise MetricError("vus needs at least 2 budgets and 2 thresholds")
    if len(table) == 0:
        return _empty("vus")
    m_axis = budget_positions(table.budgets, cfg.budget_axis)
    lo, hi = thr[0], thr[-1]
    if t_integration == "grid":
        values = np.array([[recall_at(table, t, m, cfg.threshold_comparison) for m in table.budgets] for t in thr])
        return surface_volume(values, thr, m_axis)
    if t_integration != "exact":
        raise MetricError(f"unknown t_integration {t_integration!r}")
    per_budget = [mean_recall_over_thresholds(table.column(m), lo, hi) for m in table.budgets]
    return trapezoid(per_budget, m_axis) / (m_axis[-1] - m_axis[0])


# --------------------------------------------------------------------------
# Full report


def evaluate(d: Dataset, p: ProposalSet, cfg: EvaluationConfig | None = None, threads: int = 1) -> dict:
    """Run the whole metric suite for one method; returns a JSON-ready dict."""
    cfg = _cfg(cfg)
    table = best_overlaps(d, p, cfg.proposal_budgets, threads=threads, matching=cfg.matching)
    return report_from_table(table, cfg)


def report_from_table(table: BestOverlapTable, cfg: EvaluationConfig) -> dict:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyGroundTruthWarning)
        scalars = []
        for m in table.budgets:
            row = {
                "budget": m,
                "auc": auc(table, m, cfg),
                "average_recall": average_recall(table, m, cfg),
                "abo": abo(table, m),
                "mabo": mabo(table, m),
            }
            for t in cfg.report_thresholds:
                row[f"recall@{t:g}"] = recall_at(table, t, m, cfg.threshold_comparison)
            scalars.append(row)
        curves = [auc_vs_budget(table, cfg), ar_vs_budget(table, cfg), mabo_vs_budget(table)]
        curves += [recall_vs_budget(table, t, cfg) for t in cfg.report_thresholds]
        curves += [recall_vs_threshold(table, m, cfg) for m in table.budgets]
        v = vus(table, cfg) if len(table.budgets) >= 2 and len(cfg.iou_thresholds) >= 2 else None
    if len(table) == 0:
        log.warning("%s: evaluated against zero ground-truth instances", table.method_name)
    return {
        "method": table.method_name,
        "num_instances": len(table),
        "vus": v,
        "per_budget": scalars,
        "curves": [c.to_dict() for c in curves],
    }
