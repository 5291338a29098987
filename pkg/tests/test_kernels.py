"""The compiled and numpy backends must agree bit for bit."""
import os
import subprocess
import sys

import numpy as np
import pytest

from propeval import kernels
from propeval.metrics import best_overlaps

from conftest import random_world

try:
    compiled = kernels.get_backend("cython")
except ImportError:
    compiled = None

pure = kernels.get_backend("python")
needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def _boxes(rng, n):
    xy = rng.uniform(0, 100, (n, 2))
    wh = rng.uniform(0.5, 60, (n, 2))
    return np.ascontiguousarray(np.hstack([xy, xy + wh]))


@needs_ext
@pytest.mark.parametrize("n,k", [(0, 5), (5, 0), (1, 1), (17, 40)])
def test_iou_matrix_backends_identical(n, k):
    rng = np.random.default_rng(n * 100 + k)
    a, b = _boxes(rng, n), _boxes(rng, k)
    assert np.array_equal(compiled.iou_matrix(a, b), pure.iou_matrix(a, b))


@needs_ext
@pytest.mark.parametrize("thr", [0.0, 0.2, 0.5, 0.8])
def test_nms_keep_backends_identical(thr):
    boxes = _boxes(np.random.default_rng(3), 60)
    assert np.array_equal(compiled.nms_keep(boxes, thr), pure.nms_keep(boxes, thr))


@needs_ext
def test_best_overlaps_backends_identical():
    rng = np.random.default_rng(9)
    for _ in range(30):
        d, p, _, _ = random_world(rng, integer=False)
        budgets = (1, 2, 5, 20)
        a = best_overlaps(d, p, budgets, backend="cython")
        b = best_overlaps(d, p, budgets, backend="python")
        assert np.array_equal(a.best, b.best)


def test_selected_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


def test_env_var_forces_fallback():
    code = "import propeval; print(propeval.BACKEND)"
    env = {**os.environ, "PROPEVAL_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
