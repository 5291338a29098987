"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--images N] [--proposals K] [--repeats R]
"""
import argparse
import time

import numpy as np

from propeval import kernels
from propeval.data_model import Category, Dataset, GroundTruthInstance, ImageRecord, ProposalSet
from propeval.geometry import BoundingBox
from propeval.metrics import best_overlaps


def make_world(n_images, n_props, seed=0):
    rng = np.random.default_rng(seed)
    W, H = 500, 400
    images, instances, arrays = [], [], {}
    for i in range(n_images):
        image_id = f"b{i:05d}"
        images.append(ImageRecord(image_id, W, H))
        for _ in range(int(rng.integers(1, 10))):
            x0, y0 = rng.uniform(0, 0.7) * W, rng.uniform(0, 0.7) * H
            box = BoundingBox(x0, y0, x0 + rng.uniform(0.05, 0.3) * W, y0 + rng.uniform(0.05, 0.3) * H)
            instances.append(GroundTruthInstance(len(instances), image_id, 0, box))
        xy = rng.uniform(0, 0.5, (n_props, 2)) * (W, H)
        arrays[image_id] = (np.hstack([xy, xy + rng.uniform(0.05, 0.5, (n_props, 2)) * (W, H)]), rng.random(n_props))
    d = Dataset(images, [Category(0, "x")], instances)
    d.gt_arrays  # noqa: B018
    return d, ProposalSet.from_arrays("bench", arrays)


def best_of(fn, repeats):
    out = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--images", type=int, default=1000)
    ap.add_argument("--proposals", type=int, default=1000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    backends = ["python"]
    try:
        kernels.get_backend("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled extension not built; timing the numpy fallback only")

    d, p = make_world(args.images, args.proposals)
    rng = np.random.default_rng(1)
    xy = rng.uniform(0, 400, (2000, 2))
    boxes = np.ascontiguousarray(np.hstack([xy, xy + rng.uniform(5, 100, (2000, 2))]))
    budgets = (1, 10, 100, 1000)

    cases = {
        f"best_overlaps {args.images}x{args.proposals} ({len(d.instances)} GT)":
            lambda name: best_overlaps(d, p, budgets, backend=name),
        "iou_matrix 500x2000": lambda name: kernels.get_backend(name).iou_matrix(boxes[:500], boxes),
        "nms_keep 2000 @0.5": lambda name: kernels.get_backend(name).nms_keep(boxes, 0.5),
    }
    print(f"{'case':48s} " + " ".join(f"{b:>10s}" for b in backends) + ("    speedup" if len(backends) == 2 else ""))
    for label, fn in cases.items():
        times = [best_of(lambda: fn(b), args.repeats) for b in backends]
        row = f"{label:48s} " + " ".join(f"{t:9.4f}s" for t in times)
        if len(times) == 2:
            row += f" {times[1] / times[0]:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
