import numpy as np
import pytest

from propeval.data_model import Category, Dataset, GroundTruthInstance, ImageRecord, ProposalSet
from propeval.geometry import BoundingBox


def random_box(rng, W, H, integer=False):
    while True:
        x0, x1 = sorted(rng.uniform(0, W, 2))
        y0, y1 = sorted(rng.uniform(0, H, 2))
        if integer:
            x0, x1, y0, y1 = np.floor(x0), np.ceil(x1), np.floor(y0), np.ceil(y1)
        if x1 > x0 and y1 > y0:
            return (float(x0), float(y0), float(x1), float(y1))


def random_world(rng, max_images=10, max_props=20, max_gt=5, n_cats=3, integer=True):
    """Random dataset + proposal set + the plain-dict view the oracles consume."""
    W, H = 60, 50
    n_images = int(rng.integers(1, max_images + 1))
    images = [ImageRecord(f"im{k}", W, H) for k in range(n_images)]
    instances, gt_by_image, props_by_image, arrays = [], {}, {}, {}
    for im in images:
        gts = []
        for _ in range(int(rng.integers(0, max_gt + 1))):
            box = random_box(rng, W, H, integer)
            cat = int(rng.integers(0, n_cats))
            g = GroundTruthInstance(len(instances), im.image_id, cat, BoundingBox(*box))
            instances.append(g)
            gts.append((g.instance_id, cat, box))
        gt_by_image[im.image_id] = gts
        n_p = int(rng.integers(0, max_props + 1))
        boxes = [random_box(rng, W, H, integer) for _ in range(n_p)]
        # coarse scores so that ties (broken by rank) actually occur
        scores = [float(s) for s in rng.integers(0, 5, n_p) / 4.0]
        props_by_image[im.image_id] = [(b, s, r) for r, (b, s) in enumerate(zip(boxes, scores))]
        if n_p:
            arrays[im.image_id] = (np.array(boxes), np.array(scores))
    d = Dataset(images, [Category(k, f"k{k}") for k in range(n_cats)], instances)
    return d, ProposalSet.from_arrays("m", arrays), gt_by_image, props_by_image


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_dataset(boxes_by_image, size=(100, 100), cats=None, n_cats=1):
    """``boxes_by_image``: {image_id: [(category, (x0, y0, x1, y1)), ...]}."""
    images = [ImageRecord(i, *size) for i in boxes_by_image]
    inst = []
    for i, items in boxes_by_image.items():
        for cat, box in items:
            inst.append(GroundTruthInstance(len(inst), i, cat, BoundingBox(*box)))
    cats = cats or [Category(k, f"k{k}") for k in range(n_cats)]
    return Dataset(images, cats, inst)


@pytest.fixture(scope="session")
def cli_inputs(tmp_path_factory):
    from cli_cases import build_inputs

    return build_inputs(tmp_path_factory.mktemp("cli_in"))


@pytest.fixture(scope="session")
def cli_runs(cli_inputs, tmp_path_factory):
    """Outputs of the full command list: twice single-threaded, then with 4 and 8 threads."""
    from cli_cases import run_all

    runs = {}
    for label, threads in (("t1", 1), ("t1-repeat", 1), ("t4", 4), ("t8", 8)):
        runs[label] = run_all(cli_inputs, tmp_path_factory.mktemp(f"cli_{label}"), threads)
    return runs


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
