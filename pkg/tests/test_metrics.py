import warnings

import numpy as np
import pytest

from conftest import make_dataset, random_world
from oracles import (
    fine_ar,
    fine_vus,
    ref_abo,
    ref_auc,
    ref_best_overlaps,
    ref_mabo,
    ref_recall,
)
from propeval.data_model import ProposalSet
from propeval.metrics import (
    GREATER_EQUAL,
    STRICT,
    BestOverlapTable,
    CurveResult,
    EmptyGroundTruthWarning,
    EvaluationConfig,
    MetricError,
    abo,
    auc,
    average_recall,
    average_recall_grid,
    best_overlaps,
    cap_budgets,
    evaluate,
    mabo,
    recall_at,
    recall_vs_budget,
    recall_vs_threshold,
    surface_volume,
    vus,
)


def table(values, cats=None, budgets=(1,)):
    v = np.asarray(values, dtype=np.float64).reshape(len(values), len(budgets))
    n = v.shape[0]
    cats = np.zeros(n, dtype=np.int64) if cats is None else np.asarray(cats)
    return BestOverlapTable(tuple(budgets), v, np.arange(n), cats, ["i"] * n, "t")


def test_auc_hand_example():
    cfg = EvaluationConfig(auc_grid_step=0.25)
    assert auc(table([0.6, 0.9]), 1, cfg) == pytest.approx(0.5, abs=1e-15)


def test_auc_default_grid_examples():
    assert auc(table([1.0]), 1) == pytest.approx(0.95, abs=1e-12)
    assert auc(table([0.5]), 1) == 0.0
    ge = EvaluationConfig(threshold_comparison=GREATER_EQUAL)
    assert auc(table([1.0]), 1, ge) == pytest.approx(1.0, abs=1e-12)


def test_recall_comparison_modes():
    t = table([0.5, 0.7, 0.7, 0.2])
    assert recall_at(t, 0.7, 1) == 0.0
    assert recall_at(t, 0.7, 1, GREATER_EQUAL) == 0.5
    assert recall_at(t, 0.5, 1, STRICT) == 0.5
    assert recall_at(t, 0.5, 1, GREATER_EQUAL) == 0.75


def test_abo_and_mabo_hand_example():
    t = table([0.2, 0.6, 0.8], cats=[0, 0, 1])
    assert mabo(t, 1) == pytest.approx(0.6, abs=1e-15)
    assert abo(t, 1) == pytest.approx(1.6 / 3, abs=1e-15)
    assert abo(t, 1, category=1) == 0.8


@pytest.mark.parametrize("best,want", [(0.5, 0.0), (0.4, 0.0), (1.0, 1.0), (0.75, 0.5), (0.6, 0.2)])
def test_average_recall_boundaries(best, want):
    assert average_recall(table([best]), 1) == pytest.approx(want, abs=1e-12)


def test_average_recall_grid_converges_to_exact(rng):
    vals = rng.uniform(0, 1, 500)
    exact = average_recall(table(vals), 1)
    coarse = average_recall_grid(table(vals), 1)
    fine = average_recall_grid(table(vals), 1, EvaluationConfig(ar_grid_step=0.0005))
    assert abs(fine - exact) < abs(coarse - exact) + 1e-12
    assert abs(fine - exact) < 1e-3


def test_empty_ground_truth_is_zero_with_warning():
    t = table(np.zeros((0, 2)), budgets=(1, 2))
    for fn in (lambda: recall_at(t, 0.5, 1), lambda: auc(t, 1), lambda: average_recall(t, 1),
               lambda: abo(t, 1), lambda: mabo(t, 1), lambda: vus(t)):
        with pytest.warns(EmptyGroundTruthWarning):
            assert fn() == 0.0


def test_unmaterialized_budget_rejected():
    with pytest.raises(MetricError):
        recall_at(table([0.9]), 0.5, 10)


@pytest.mark.parametrize("kw", [
    {"proposal_budgets": (10, 5)}, {"proposal_budgets": (0, 1)}, {"iou_thresholds": (0.7, 0.5)},
    {"threshold_comparison": "gt"}, {"budget_axis": "sqrt"}, {"auc_threshold_range": (0.8, 0.5)},
])
def test_config_validation(kw):
    with pytest.raises(MetricError):
        EvaluationConfig(**kw)


def test_config_round_trip_and_unknown_keys():
    cfg = EvaluationConfig(proposal_budgets=(1, 5), matching="one_to_one")
    assert EvaluationConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(MetricError):
        EvaluationConfig.from_dict({"budgets": [1]})


def test_cap_budgets():
    assert cap_budgets((1, 10, 100, 1000), 250) == (1, 10, 100, 250)
    assert cap_budgets((1, 10, 100), 100) == (1, 10, 100)
    assert cap_budgets((1, 10), 0) == (1,)


def test_curve_x_must_increase():
    with pytest.raises(MetricError):
        CurveResult("x", "y", [(2, 0.1), (1, 0.2)])


def test_best_overlaps_matches_oracle(rng):
    budgets = (1, 2, 3, 7, 20)
    for _ in range(60):
        d, p, gts, props = random_world(rng)
        t = best_overlaps(d, p, budgets)
        ref, _ = ref_best_overlaps(gts, props, budgets)
        for row, inst in enumerate(t.instance_ids):
            for j, m in enumerate(budgets):
                assert abs(t.best[row, j] - ref[int(inst)][m]) <= 1e-12


def test_scalar_metrics_match_oracle(rng):
    budgets = (1, 4, 20)
    cfg = EvaluationConfig(proposal_budgets=budgets)
    for _ in range(40):
        d, p, gts, props = random_world(rng, integer=False)
        t = best_overlaps(d, p, budgets)
        ref, cats = ref_best_overlaps(gts, props, budgets)
        if not ref:
            continue
        for m in budgets:
            vals = [ref[i][m] for i in sorted(ref)]
            by_cat = {}
            for i in ref:
                by_cat.setdefault(cats[i], []).append(ref[i][m])
            assert abs(recall_at(t, 0.5, m) - ref_recall(vals, 0.5)) <= 1e-12
            assert abs(recall_at(t, 0.5, m, GREATER_EQUAL) - ref_recall(vals, 0.5, strict=False)) <= 1e-12
            assert abs(auc(t, m, cfg) - ref_auc(vals)) <= 1e-12
            assert abs(abo(t, m) - ref_abo(vals)) <= 1e-12
            assert abs(mabo(t, m) - ref_mabo(by_cat)) <= 1e-12
            assert abs(average_recall(t, m) - fine_ar(vals)) <= 1e-3
        vb = {m: [ref[i][m] for i in ref] for m in budgets}
        assert abs(vus(t, cfg) - fine_vus(vb, budgets, 0.5, 1.0)) <= 1e-3
        lin = EvaluationConfig(proposal_budgets=budgets, budget_axis="linear")
        assert abs(vus(t, lin) - fine_vus(vb, budgets, 0.5, 1.0, log_axis=False)) <= 1e-3


def test_vus_grid_mode_uses_double_trapezoid():
    t = table([[0.6, 0.9], [0.3, 0.8]], budgets=(1, 10))
    cfg = EvaluationConfig(iou_thresholds=(0.5, 0.75, 1.0), proposal_budgets=(1, 10))
    values = np.array([[recall_at(t, th, m) for m in (1, 10)] for th in (0.5, 0.75, 1.0)])
    want = surface_volume(values, (0.5, 0.75, 1.0), np.log([1, 10]))
    assert vus(t, cfg, t_integration="grid") == pytest.approx(want, abs=1e-15)


def test_surface_volume_separable():
    t_axis = np.array([0.0, 0.3, 1.0])
    m_axis = np.array([0.0, 2.0, 3.0])
    f, g = np.array([1.0, 2.0, 4.0]), np.array([3.0, 1.0, 2.0])

    def trap(y, x):
        return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2))

    want = trap(f, t_axis) * trap(g, m_axis) / 3.0
    assert surface_volume(np.outer(f, g), t_axis, m_axis) == pytest.approx(want, abs=1e-14)


def test_vus_perfect_and_useless():
    assert vus(table([[1.0, 1.0]], budgets=(1, 10))) == pytest.approx(1.0, abs=1e-12)
    assert vus(table([[0.0, 0.4]], budgets=(1, 10))) == 0.0


def test_monotone_curves(rng):
    budgets = (1, 2, 5, 10, 20)
    cfg = EvaluationConfig(proposal_budgets=budgets)
    for _ in range(30):
        d, p, _, _ = random_world(rng)
        t = best_overlaps(d, p, budgets)
        if len(t) == 0:
            continue
        assert np.all(np.diff(t.best, axis=1) >= 0)
        for m in budgets:
            assert np.all(np.diff(recall_vs_threshold(t, m, cfg).y) <= 0)
        for th in (0.5, 0.7):
            assert np.all(np.diff(recall_vs_budget(t, th, cfg).y) >= 0)


def test_extra_low_priority_proposals_never_hurt(rng):
    budgets = (1, 5, 50)
    for _ in range(20):
        d, p, _, _ = random_world(rng)
        base = best_overlaps(d, p, budgets)
        extra = {}
        for im in d.image_ids:
            ip = p.get(im)
            boxes = np.vstack([ip.boxes, [[0, 0, 60, 50]]]) if ip is not None else np.array([[0, 0, 60, 50.0]])
            scores = np.append(ip.scores, -1.0) if ip is not None else np.array([-1.0])
            extra[im] = (boxes, scores)
        more = best_overlaps(d, ProposalSet.from_arrays("m", extra), budgets)
        assert np.all(more.best >= base.best)


def test_threads_do_not_change_results(rng):
    d, p, _, _ = random_world(rng, max_images=40, max_props=50)
    a = best_overlaps(d, p, (1, 10, 50))
    for th in (2, 4, 8):
        assert np.array_equal(best_overlaps(d, p, (1, 10, 50), threads=th).best, a.best)


def test_one_to_one_consumes_proposals():
    d = make_dataset({"a": [(0, (0, 0, 10, 10)), (0, (0, 0, 10, 10))]})
    p = ProposalSet.from_arrays("m", {"a": (np.array([[0, 0, 10, 10.0], [0, 0, 10, 5.0]]), np.array([1.0, 0.5]))})
    ind = best_overlaps(d, p, (1, 2))
    one = best_overlaps(d, p, (1, 2), matching="one_to_one")
    assert ind.column(1).tolist() == [1.0, 1.0]
    assert sorted(one.column(1).tolist()) == [0.0, 1.0]
    assert sorted(one.column(2).tolist()) == [0.5, 1.0]
    assert np.all(one.best <= ind.best)


def test_images_without_proposals_count_as_misses():
    d = make_dataset({"a": [(0, (0, 0, 10, 10))], "b": [(0, (0, 0, 10, 10))]})
    p = ProposalSet.from_arrays("m", {"a": (np.array([[0, 0, 10, 10.0]]), np.array([1.0]))})
    assert recall_at(best_overlaps(d, p, (1,)), 0.5, 1) == 0.5


def test_restrict_partitions_table(rng):
    d, p, _, _ = random_world(rng, max_images=10, n_cats=4)
    t = best_overlaps(d, p, (1, 10))
    a, b = t.restrict([0, 1]), t.restrict([2, 3])
    assert len(a) + len(b) == len(t)
    assert set(a.category_ids.tolist()) <= {0, 1}


def test_evaluate_report_shape():
    d = make_dataset({"a": [(0, (0, 0, 10, 10))]})
    p = ProposalSet.from_arrays("m", {"a": (np.array([[0, 0, 10, 10.0], [50, 50, 60, 60.0]]), np.array([0.1, 0.9]))})
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        r = evaluate(d, p, EvaluationConfig(proposal_budgets=(1, 2)))
    assert r["num_instances"] == 1
    assert [row["recall@0.5"] for row in r["per_budget"]] == [0.0, 1.0]
    assert 0.0 < r["vus"] < 1.0
