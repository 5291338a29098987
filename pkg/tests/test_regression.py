"""Seeded end-to-end runs compared with values pinned in fixtures/regression.json."""
import json
from pathlib import Path

import pytest

from propeval.diagnostics import bias_capacity, simulate_runs, three_regime_eval
from propeval.metrics import EvaluationConfig
from propeval.proposers import DmpConfig, oracle_dmp, random_proposer
from propeval.synth import SynthConfig, generate_dataset

PINNED = json.loads((Path(__file__).parent / "fixtures" / "regression.json").read_text())


def test_gameability_rows_pinned():
    full, partial = generate_dataset(SynthConfig(
        seed=7, num_images=200, num_categories=20,
        category_size_params=tuple((0.6 - 0.3 * k / 19, 0.3) for k in range(20))))
    subset = sorted(partial.annotated_categories)
    rep = three_regime_eval(
        full, subset,
        [oracle_dmp(full, DmpConfig(seen_categories=subset, seed=7)),
         random_proposer(full, 1000, seed=7, min_side=0.15, max_side=0.7)],
        EvaluationConfig(proposal_budgets=(1, 3, 10, 32, 100, 316, 1000)))
    assert rep.to_dict()["rows"] == pytest.approx(PINNED["gameability_rows"], abs=1e-12)
    assert rep.rankings["subset"][100] == ["oracle_dmp", "random"]
    assert rep.rankings["complement"][100] == ["random", "oracle_dmp"]


def test_bias_capacity_simulation_pinned():
    full, _ = generate_dataset(SynthConfig(seed=0, num_images=50, num_categories=10))
    res = bias_capacity(full, simulate_runs(full, (2, 4, 6, 8, 10), DmpConfig(seed=0)),
                        EvaluationConfig(proposal_budgets=(1, 10, 100, 1000)))
    got = [v for pt in res.auc_at_fixed_budget.points for v in pt]
    want = [v for pt in PINNED["bias_capacity_auc_at_100"] for v in pt]
    assert got == pytest.approx(want, abs=1e-12)
    assert res.slope == pytest.approx(PINNED["bias_capacity_slope"], abs=1e-12)
