"""Gameability diagnostics: three-regime evaluation, bias capacity, per-category recall."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data_model import Dataset, DatasetError, ParseError, ProposalSet
from .metrics import (
    BestOverlapTable,
    CurveResult,
    EmptyGroundTruthWarning,
    EvaluationConfig,
    auc,
    auc_vs_budget,
    best_overlaps,
    recall_at,
    report_from_table,
)
from .proposers import DmpConfig, oracle_dmp

REGIMES = ("subset", "complement", "all")


class DiagnosticsError(ValueError):
    pass


@dataclass
class GameabilityReport:
    subset: list[int]
    complement: list[int]
    budgets: list[int]
    methods: list[str]
    # rows[method][budget] -> {"auc_subset", "auc_complement", "auc_all", "drop"}
    rows: dict[str, dict[int, dict[str, float]]]
    rankings: dict[str, dict[int, list[str]]]
    inversions: list[dict]
    suites: dict[str, dict[str, dict]] = field(default_factory=dict)

    def drop_curve(self, method: str) -> CurveResult:
        pts = [(m, self.rows[method][m]["drop"]) for m in self.budgets]
        return CurveResult("proposals", "auc_subset - auc_complement", pts, method, {})

    def to_dict(self) -> dict:
        return {
            "subset_categories": self.subset,
            "complement_categories": self.complement,
            "budgets": self.budgets,
            "methods": self.methods,
            "rows": [
                {"method": name, "budget": m, **self.rows[name][m]}
                for name in self.methods for m in self.budgets
            ],
            "rankings": {
                reg: [{"budget": m, "order": self.rankings[reg][m]} for m in self.budgets]
                for reg in REGIMES
            },
            "inversions": self.inversions,
            "suites": self.suites,
        }


def _ranking(values: dict[str, float]) -> list[str]:
    return sorted(values, key=lambda name: (-values[name], name))


def three_regime_eval(
    full: Dataset,
    subset: Iterable[int],
    proposals: Sequence[ProposalSet],
    cfg: EvaluationConfig | None = None,
    threads: int = 1,
    with_suites: bool = False,
) -> GameabilityReport:
    """Evaluate every method on the subset categories, their complement, and all.

    Best overlaps are computed once per method on ``full`` and split by
    category, which is the same as evaluating on
    ``restrict_categories(full, regime)`` because each instance's best overlap
    does not depend on the other instances.
    """
    cfg = cfg or EvaluationConfig()
    all_ids = {c.id for c in full.categories}
    subset = frozenset(int(c) for c in subset)
    if not subset:
        raise DiagnosticsError("subset must be non-empty")
    if not subset <= all_ids:
        raise DiagnosticsError(f"unknown category ids in subset: {sorted(subset - all_ids)}")
    complement = frozenset(all_ids) - subset
    if not complement:
        raise DiagnosticsError("subset covers all categories: no complement regime")
    names = [p.method_name for p in proposals]
    if len(set(names)) != len(names):
        raise DiagnosticsError(f"method names must be unique: {names}")

    budgets = list(cfg.proposal_budgets)
    rows, suites = {}, {}
    by_name = sorted(proposals, key=lambda p: p.method_name)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyGroundTruthWarning)
        for p in by_name:
            table = best_overlaps(full, p, budgets, threads=threads, matching=cfg.matching)
            regimes = {"subset": table.restrict(subset), "complement": table.restrict(complement), "all": table}
            rows[p.method_name] = {}
            for m in budgets:
                a = {reg: auc(t, m, cfg) for reg, t in regimes.items()}
                rows[p.method_name][m] = {
                    "auc_subset": a["subset"],
                    "auc_complement": a["complement"],
                    "auc_all": a["all"],
                    "drop": a["subset"] - a["complement"],
                }
            if with_suites:
                suites[p.method_name] = {reg: report_from_table(t, cfg) for reg, t in regimes.items()}

    methods = sorted(names)
    rankings = {
        reg: {m: _ranking({n: rows[n][m][f"auc_{reg}"] for n in methods}) for m in budgets}
        for reg in REGIMES
    }
    inversions = []
    for m in budgets:
        for i, a in enumerate(methods):
            for b in methods[i + 1:]:
                ds = rows[a][m]["auc_subset"] - rows[b][m]["auc_subset"]
                dc = rows[a][m]["auc_complement"] - rows[b][m]["auc_complement"]
                if ds * dc < 0:
                    inversions.append({
                        "budget": m,
                        "better_on_subset": a if ds > 0 else b,
                        "better_on_complement": a if dc > 0 else b,
                    })
    return GameabilityReport(
        sorted(subset), sorted(complement), budgets, methods, rows, rankings, inversions, suites
    )


@dataclass
class BiasCapacityResult:
    seen_counts: list[int]
    budgets: list[int]
    fixed_budget: int
    curves: dict[int, CurveResult]
    auc_at_fixed_budget: CurveResult
    improvement: CurveResult
    slope: float
    method_name: str = ""

    def to_dict(self) -> dict:
        return {
            "method": self.method_name,
            "seen_counts": self.seen_counts,
            "budgets": self.budgets,
            "fixed_budget": self.fixed_budget,
            "slope_per_category_fraction": self.slope,
            "auc_vs_budget": [
                {"seen_count": k, **self.curves[k].to_dict()} for k in self.seen_counts
            ],
            "auc_at_fixed_budget": self.auc_at_fixed_budget.to_dict(),
            "improvement": self.improvement.to_dict(),
        }


def bias_capacity(
    full: Dataset,
    runs: Sequence[tuple[int, ProposalSet]],
    cfg: EvaluationConfig | None = None,
    fixed_budget: int = 100,
    threads: int = 1,
) -> BiasCapacityResult:
    """AUC as a function of the number of categories a method was trained on.

    Every run is evaluated against all annotations of ``full``. ``slope`` is
    the least-squares slope of AUC at ``fixed_budget`` against the fraction
    of categories seen; a category-blind method gives a flat line.
    """
    cfg = cfg or EvaluationConfig()
    ks = [int(k) for k, _ in runs]
    if len(set(ks)) != len(ks):
        dup = sorted({k for k in ks if ks.count(k) > 1})
        raise DiagnosticsError(f"duplicate seen counts {dup}")
    if len(ks) < 2:
        raise DiagnosticsError("bias capacity needs at least 2 distinct seen counts")
    budgets = sorted(set(cfg.proposal_budgets) | {int(fixed_budget)})
    cfg = cfg.with_budgets(budgets)
    ordered = sorted(runs, key=lambda r: int(r[0]))
    curves, tables = {}, {}
    for k, p in ordered:
        tables[k] = best_overlaps(full, p, budgets, threads=threads, matching=cfg.matching)
        curves[k] = auc_vs_budget(tables[k], cfg)
    ks = [int(k) for k, _ in ordered]
    fixed = [auc(tables[k], fixed_budget, cfg) for k in ks]
    name = ordered[0][1].method_name
    at_fixed = CurveResult("seen_categories", f"auc@{fixed_budget}", list(zip(ks, fixed)), name,
                           {"budget": fixed_budget})
    lo, hi = ks[0], ks[-1]
    improvement = CurveResult(
        "proposals", f"auc(seen={hi}) - auc(seen={lo})",
        [(m, auc(tables[hi], m, cfg) - auc(tables[lo], m, cfg)) for m in budgets], name,
        {"seen_min": lo, "seen_max": hi},
    )
    frac = np.array(ks, dtype=np.float64) / max(len(full.categories), 1)
    slope = float(np.polyfit(frac, fixed, 1)[0])
    return BiasCapacityResult(ks, budgets, int(fixed_budget), curves, at_fixed, improvement, slope, name)


def simulate_runs(full: Dataset, seen_counts: Iterable[int], dmp_cfg: DmpConfig) -> list[tuple[int, ProposalSet]]:
    """Oracle-DMP runs that have seen the first ``k`` categories, for each ``k``."""
    cats = sorted(c.id for c in full.categories)
    runs = []
    for k in seen_counts:
        if not 0 <= k <= len(cats):
            raise DiagnosticsError(f"seen count {k} outside 0..{len(cats)}")
        runs.append((int(k), oracle_dmp(full, dmp_cfg.with_seen(cats[:k]), method_name="oracle_dmp")))
    return runs


# --------------------------------------------------------------------------
# Per-category recall

FINE_KEYS = ("size", "frequency", "supercategory")


@dataclass
class FineGrainedResult:
    key: str
    iou_threshold: float
    budget: int
    rows: list[dict]
    method_name: str = ""

    def curve(self) -> CurveResult:
        label = "group" if self.key == "supercategory" else f"category rank by {self.key}"
        return CurveResult(label, f"recall@{self.iou_threshold:g}",
                           [(i + 1, r["recall"]) for i, r in enumerate(self.rows)],
                           self.method_name, {"key": self.key, "budget": self.budget,
                                              "labels": [r["label"] for r in self.rows]})

    def to_dict(self) -> dict:
        return {"method": self.method_name, "key": self.key, "iou_threshold": self.iou_threshold,
                "budget": self.budget, "rows": self.rows}


def load_supercategory_map(path) -> dict[str, str]:
    """Two-column CSV ``category,supercategory`` (header row required)."""
    out = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["category", "supercategory"]:
            raise ParseError(f"{path}:1: expected header category,supercategory")
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{reader.line_num}: expected 2 fields")
            out[row[0].strip()] = row[1].strip()
    return out


def fine_grained_recall(
    full: Dataset,
    p: ProposalSet,
    t: float = 0.7,
    M: int = 100,
    key: str = "size",
    cfg: EvaluationConfig | None = None,
    supercategories: dict[str, str] | None = None,
    size_measure: str = "sqrt_area",
    table: BestOverlapTable | None = None,
) -> FineGrainedResult:
    """Recall@t at budget M per category, ordered or grouped by ``key``.

    ``size`` orders by the mean of sqrt(box area / image area) per category
    (``size_measure="area"`` uses the raw area ratio); ``frequency`` orders by
    instance count; ``supercategory`` pools categories into groups and
    reports each group's instance-weighted recall. Orders are ascending, ties
    by category id. Categories without instances are left out.
    """
    cfg = cfg or EvaluationConfig()
    if key not in FINE_KEYS:
        raise DiagnosticsError(f"key must be one of {FINE_KEYS}")
    if size_measure not in ("sqrt_area", "area"):
        raise DiagnosticsError("size_measure must be 'sqrt_area' or 'area'")
    if table is None or M not in table.budgets:
        table = best_overlaps(full, p, [M], matching=cfg.matching)
    comparison = cfg.threshold_comparison

    rel = {}
    for g in full.instances:
        im = full.image_by_id[g.image_id]
        r = g.box.width * g.box.height / (im.width * im.height)
        rel.setdefault(g.category_id, []).append(np.sqrt(r) if size_measure == "sqrt_area" else r)

    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyGroundTruthWarning)
        if key == "supercategory":
            groups: dict[str, list[int]] = {}
            for c in full.categories:
                if c.id not in rel:
                    continue
                sc = (supercategories or {}).get(c.name, c.supercategory)
                if sc is None:
                    raise DatasetError(f"category {c.name!r} has no supercategory")
                groups.setdefault(sc, []).append(c.id)
            for sc in sorted(groups):
                sub = table.restrict(groups[sc])
                rows.append({"label": sc, "categories": [full.category_by_id[c].name for c in groups[sc]],
                             "count": len(sub), "recall": recall_at(sub, t, M, comparison)})
        else:
            for c in full.categories:
                if c.id not in rel:
                    continue
                sub = table.restrict([c.id])
                value = float(np.mean(rel[c.id])) if key == "size" else len(rel[c.id])
                rows.append({"label": c.name, "category_id": c.id, "key_value": value,
                             "count": len(sub), "recall": recall_at(sub, t, M, comparison)})
            rows.sort(key=lambda r: (r["key_value"], r["category_id"]))
    return FineGrainedResult(key, float(t), int(M), rows, p.method_name)


def read_name_list(spec: str) -> list[str]:
    """Category names from an inline comma list or from a file (one per line or comma separated)."""
    path = Path(spec)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
        items = [s.strip() for line in text.splitlines() for s in line.split(",")]
    else:
        items = [s.strip() for s in spec.split(",")]
    names = [s for s in items if s and not s.startswith("#")]
    if not names:
        raise DiagnosticsError(f"empty category list {spec!r}")
    return names
