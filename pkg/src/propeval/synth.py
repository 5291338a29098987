"""Seeded synthetic box worlds with a partially annotated view.

Random streams: image ``i`` draws from
``numpy.random.Generator(PCG64(SeedSequence([seed, i])))``, so each image is
reproducible on its own and images can be generated in any order.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .data_model import Category, Dataset, GroundTruthInstance, ImageRecord, restrict_categories
from .geometry import BoundingBox


class SynthConfigError(ValueError):
    pass


def image_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, key)])))


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    num_images: int = 200
    image_size: tuple[int, int] = (640, 480)
    num_categories: int = 20
    category_frequency_weights: tuple[float, ...] | None = None
    # per category (mean side as a fraction of the image side, relative jitter)
    category_size_params: tuple[tuple[float, float], ...] | None = None
    instances_per_image: tuple[int, int] = (1, 6)
    annotated_fraction_of_categories: float = 0.5

    def __post_init__(self):
        n = self.num_categories
        if n <= 0 or self.num_images <= 0:
            raise SynthConfigError("num_images and num_categories must be positive")
        w, h = (int(v) for v in self.image_size)
        if w <= 0 or h <= 0:
            raise SynthConfigError(f"image_size must be positive, got {self.image_size}")
        object.__setattr__(self, "image_size", (w, h))
        weights = self.category_frequency_weights
        weights = (1.0,) * n if weights is None else tuple(float(x) for x in weights)
        if len(weights) != n or any(not x > 0 for x in weights):
            raise SynthConfigError("category_frequency_weights needs num_categories positive values")
        object.__setattr__(self, "category_frequency_weights", weights)
        sizes = self.category_size_params
        if sizes is None:
            # later categories are smaller, like the rarely annotated classes of real datasets
            sizes = tuple((0.45 - 0.3 * k / max(n - 1, 1), 0.3) for k in range(n))
        sizes = tuple((float(s), float(j)) for s, j in sizes)
        if len(sizes) != n or any(not (0 < s <= 1 and 0 <= j < 1) for s, j in sizes):
            raise SynthConfigError("category_size_params needs num_categories (side in (0,1], jitter in [0,1)) pairs")
        object.__setattr__(self, "category_size_params", sizes)
        lo, hi = (int(v) for v in self.instances_per_image)
        if not 0 <= lo <= hi:
            raise SynthConfigError("instances_per_image must satisfy 0 <= min <= max")
        object.__setattr__(self, "instances_per_image", (lo, hi))
        if not 0 < self.annotated_fraction_of_categories <= 1:
            raise SynthConfigError("annotated_fraction_of_categories must lie in (0, 1]")

    @property
    def num_annotated(self) -> int:
        return math.ceil(self.annotated_fraction_of_categories * self.num_categories - 1e-12)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["image_size"] = list(self.image_size)
        d["category_frequency_weights"] = list(self.category_frequency_weights)
        d["category_size_params"] = [list(p) for p in self.category_size_params]
        d["instances_per_image"] = list(self.instances_per_image)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SynthConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise SynthConfigError(f"unknown synth config keys {sorted(unknown)}")
        d = dict(d)
        for key in ("image_size", "instances_per_image", "category_frequency_weights"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        if d.get("category_size_params") is not None:
            d["category_size_params"] = tuple(tuple(p) for p in d["category_size_params"])
        return cls(**d)


def category_name(k: int) -> str:
    return f"c{k:02d}"


def _image_instances(cfg: SynthConfig, index: int):
    rng = image_rng(cfg.seed, index)
    W, H = cfg.image_size
    lo, hi = cfg.instances_per_image
    n = int(rng.integers(lo, hi + 1))
    p = np.asarray(cfg.category_frequency_weights)
    cats = rng.choice(cfg.num_categories, size=n, p=p / p.sum())
    u = rng.uniform(-1.0, 1.0, size=(n, 2))
    centers = rng.random((n, 2)) * (W, H)
    out = []
    for k in range(n):
        side, jit = cfg.category_size_params[cats[k]]
        w = side * W * (1.0 + jit * u[k, 0])
        h = side * H * (1.0 + jit * u[k, 1])
        cx, cy = centers[k]
        box = BoundingBox(max(cx - w / 2, 0.0), max(cy - h / 2, 0.0), min(cx + w / 2, W), min(cy + h / 2, H))
        out.append((int(cats[k]), box))
    return out


def generate_dataset(cfg: SynthConfig) -> tuple[Dataset, Dataset]:
    """Return ``(full, partial)``; ``partial`` keeps only a prefix of the categories."""
    W, H = cfg.image_size
    images, instances = [], []
    for i in range(cfg.num_images):
        image_id = f"img{i:05d}"
        images.append(ImageRecord(image_id, W, H))
        for cat, box in _image_instances(cfg, i):
            instances.append(GroundTruthInstance(len(instances), image_id, cat, box))
    cats = [Category(k, category_name(k)) for k in range(cfg.num_categories)]
    full = Dataset(images, cats, instances)
    partial = restrict_categories(full, range(cfg.num_annotated))
    return full, partial
