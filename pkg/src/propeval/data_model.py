"""Datasets, proposal sets, and the file formats they travel in.

A :class:`Dataset` records which categories were actually annotated
(``annotated_categories``), so partial annotation is part of the data rather
than a filter applied at metric time.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import BoundingBox, InvalidBoxError, ScoredBox, priority_order, validate_box_array

log = logging.getLogger(__name__)


class ParseError(ValueError):
    """Malformed input file; the message names the document and element or line."""


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Category:
    id: int
    name: str
    supercategory: str | None = None


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise DatasetError(f"image {self.image_id!r}: non-positive size {self.width}x{self.height}")


@dataclass(frozen=True)
class GroundTruthInstance:
    instance_id: int
    image_id: str
    category_id: int
    box: BoundingBox


@dataclass(frozen=True)
class Dataset:
    images: tuple[ImageRecord, ...]
    categories: tuple[Category, ...]
    instances: tuple[GroundTruthInstance, ...]
    annotated_categories: frozenset[int] = None

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "categories", tuple(self.categories))
        object.__setattr__(self, "instances", tuple(self.instances))
        if self.annotated_categories is None:
            annotated = frozenset(c.id for c in self.categories)
        else:
            annotated = frozenset(int(c) for c in self.annotated_categories)
        object.__setattr__(self, "annotated_categories", annotated)
        self._validate()

    def _validate(self):
        ids = sorted(c.id for c in self.categories)
        if ids != list(range(len(ids))):
            raise DatasetError(f"category ids must be dense 0..{len(ids) - 1}, got {ids}")
        names = [c.name for c in self.categories]
        if any(not n for n in names) or len(set(names)) != len(names):
            raise DatasetError("category names must be unique and non-empty")
        if not self.annotated_categories <= set(ids):
            extra = sorted(self.annotated_categories - set(ids))
            raise DatasetError(f"annotated_categories contains unknown ids {extra}")
        sizes = {}
        for im in self.images:
            if im.image_id in sizes:
                raise DatasetError(f"duplicate image id {im.image_id!r}")
            sizes[im.image_id] = (im.width, im.height)
        seen = set()
        for inst in self.instances:
            if inst.instance_id in seen:
                raise DatasetError(f"duplicate instance id {inst.instance_id}")
            seen.add(inst.instance_id)
            if inst.image_id not in sizes:
                raise DatasetError(f"instance {inst.instance_id}: unknown image {inst.image_id!r}")
            if inst.category_id not in self.annotated_categories:
                raise DatasetError(
                    f"instance {inst.instance_id}: category {inst.category_id} is not annotated"
                )
            w, h = sizes[inst.image_id]
            b = inst.box
            if b.x_min < 0 or b.y_min < 0 or b.x_max > w or b.y_max > h:
                raise DatasetError(
                    f"instance {inst.instance_id}: box {b.as_tuple()} outside image {w}x{h}"
                )

    @cached_property
    def category_by_name(self) -> dict[str, Category]:
        return {c.name: c for c in self.categories}

    @cached_property
    def category_by_id(self) -> dict[int, Category]:
        return {c.id: c for c in self.categories}

    @cached_property
    def image_by_id(self) -> dict[str, ImageRecord]:
        return {im.image_id: im for im in self.images}

    @cached_property
    def image_ids(self) -> list[str]:
        """Image ids in ascending order; the merge order for per-image work."""
        return sorted(self.image_by_id)

    @cached_property
    def instances_by_image(self) -> dict[str, list[GroundTruthInstance]]:
        out = {i: [] for i in self.image_ids}
        for inst in sorted(self.instances, key=lambda x: x.instance_id):
            out[inst.image_id].append(inst)
        return out

    @cached_property
    def gt_arrays(self):
        """Packed ground truth in image-id order.

        Returns ``(boxes (N, 4), offsets (n_images + 1,), instance_ids,
        category_ids, row_image_ids)``.
        """
        rows, offsets, inst, cats, row_images = [], [0], [], [], []
        for image_id in self.image_ids:
            insts = self.instances_by_image[image_id]
            for g in insts:
                rows.append(g.box.as_tuple())
                inst.append(g.instance_id)
                cats.append(g.category_id)
                row_images.append(image_id)
            offsets.append(offsets[-1] + len(insts))
        return (
            np.array(rows, dtype=np.float64).reshape(-1, 4),
            np.array(offsets, dtype=np.int64),
            np.array(inst, dtype=np.int64),
            np.array(cats, dtype=np.int64),
            row_images,
        )

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        key = lambda d: (
            sorted(d.images, key=lambda i: i.image_id),
            sorted(d.categories, key=lambda c: c.id),
            sorted(d.instances, key=lambda g: g.instance_id),
            d.annotated_categories,
        )
        return key(self) == key(other)

    __hash__ = None


# --------------------------------------------------------------------------
# Proposals


@dataclass(frozen=True, eq=False)
class ImageProposals:
    """Ranked proposals of one image as parallel arrays, best first."""

    boxes: np.ndarray
    scores: np.ndarray
    ranks: np.ndarray

    def __len__(self):
        return int(self.scores.shape[0])

    def scored_boxes(self) -> list[ScoredBox]:
        return [
            ScoredBox(BoundingBox(*map(float, b)), float(s), int(r))
            for b, s, r in zip(self.boxes, self.scores, self.ranks)
        ]


def _normalize_image_proposals(boxes, scores, ranks=None) -> ImageProposals:
    boxes = validate_box_array(boxes)
    scores = np.ascontiguousarray(scores, dtype=np.float64).reshape(-1)
    if scores.shape[0] != boxes.shape[0]:
        raise ValueError(f"{boxes.shape[0]} boxes but {scores.shape[0]} scores")
    if not np.isfinite(scores).all():
        raise InvalidBoxError("non-finite proposal score")
    if ranks is None:
        ranks = np.arange(boxes.shape[0], dtype=np.int64)
    ranks = np.ascontiguousarray(ranks, dtype=np.int64).reshape(-1)
    order = priority_order(scores, ranks)
    return ImageProposals(
        np.ascontiguousarray(boxes[order]), scores[order].copy(), ranks[order].copy()
    )


class ProposalSet:
    """Per-image ranked candidate lists of one method.

    ``per_image`` maps image ids to either a sequence of :class:`ScoredBox`
    or an :class:`ImageProposals`. Lists are re-sorted by descending score
    (ties by ascending ``source_rank``); images with no proposals are dropped,
    so a missing image and an empty list are the same thing.
    """

    def __init__(self, method_name: str, per_image: Mapping[str, object] | None = None):
        self.method_name = method_name
        self.per_image: dict[str, ImageProposals] = {}
        for image_id, entry in (per_image or {}).items():
            if isinstance(entry, ImageProposals):
                props = _normalize_image_proposals(entry.boxes, entry.scores, entry.ranks)
            else:
                entry = list(entry)
                props = _normalize_image_proposals(
                    np.array([sb.box.as_tuple() for sb in entry], dtype=np.float64).reshape(-1, 4),
                    [sb.score for sb in entry],
                    [sb.source_rank for sb in entry],
                )
            if len(props):
                self.per_image[str(image_id)] = props

    @classmethod
    def from_arrays(cls, method_name, arrays: Mapping[str, tuple]) -> ProposalSet:
        """Build from ``image_id -> (boxes, scores[, ranks])``."""
        return cls(method_name, {k: ImageProposals(*_as3(v)) for k, v in arrays.items()})

    def get(self, image_id: str) -> ImageProposals | None:
        return self.per_image.get(image_id)

    def scored_boxes(self, image_id: str) -> list[ScoredBox]:
        p = self.per_image.get(image_id)
        return p.scored_boxes() if p is not None else []

    def truncated(self, budget: int) -> ProposalSet:
        """Top-``budget`` proposals per image."""
        out = ProposalSet(self.method_name)
        for k, p in self.per_image.items():
            out.per_image[k] = ImageProposals(p.boxes[:budget], p.scores[:budget], p.ranks[:budget])
        return out

    def image_ids(self) -> list[str]:
        return sorted(self.per_image)

    def total(self) -> int:
        return sum(len(p) for p in self.per_image.values())

    def max_per_image(self) -> int:
        return max((len(p) for p in self.per_image.values()), default=0)

    def missing_images(self, dataset: Dataset) -> list[str]:
        """Dataset images without proposals (evaluated as empty lists)."""
        return [i for i in dataset.image_ids if i not in self.per_image]

    def unknown_images(self, dataset: Dataset) -> list[str]:
        return [i for i in self.image_ids() if i not in dataset.image_by_id]

    def __eq__(self, other):
        # source ranks are provenance, not identity: they do not survive a file round trip
        if not isinstance(other, ProposalSet):
            return NotImplemented
        if self.method_name != other.method_name or set(self.per_image) != set(other.per_image):
            return False
        for k, a in self.per_image.items():
            b = other.per_image[k]
            if not (np.array_equal(a.boxes, b.boxes) and np.array_equal(a.scores, b.scores)):
                return False
        return True

    __hash__ = None

    def __repr__(self):
        return f"ProposalSet({self.method_name!r}, images={len(self.per_image)}, total={self.total()})"


def _as3(v):
    if isinstance(v, ImageProposals):
        return v.boxes, v.scores, v.ranks
    if len(v) == 2:
        boxes, scores = v
        return boxes, scores, np.arange(len(scores), dtype=np.int64)
    return v


# --------------------------------------------------------------------------
# Operations


def restrict_categories(d: Dataset, keep: Iterable[int]) -> Dataset:
    """Keep only instances of ``keep``; the annotated set shrinks accordingly."""
    keep = frozenset(int(k) for k in keep)
    unknown = keep - set(d.category_by_id)
    if unknown:
        raise DatasetError(f"unknown category ids {sorted(unknown)}")
    return Dataset(
        images=d.images,
        categories=d.categories,
        instances=tuple(g for g in d.instances if g.category_id in keep),
        annotated_categories=keep & d.annotated_categories,
    )


def complement_categories(d: Dataset, subset: Iterable[int]) -> frozenset[int]:
    return frozenset(c.id for c in d.categories) - frozenset(subset)


def resolve_category_names(d: Dataset, names: Iterable[str]) -> frozenset[int]:
    out = set()
    for n in names:
        if n not in d.category_by_name:
            raise DatasetError(f"unknown category name {n!r}")
        out.add(d.category_by_name[n].id)
    return frozenset(out)


@dataclass
class CategoryStats:
    id: int
    name: str
    count: int
    mean_relative_area: float | None
    mean_sqrt_relative_area: float | None
    in_split: bool


@dataclass
class StatsReport:
    inside_instances: int
    outside_instances: int
    per_category: list[CategoryStats] = field(default_factory=list)
    coverage_inside: float = 0.0
    coverage_outside: float = 0.0
    coverage_all: float = 0.0

    def to_dict(self) -> dict:
        return {
            "inside_instances": self.inside_instances,
            "outside_instances": self.outside_instances,
            "coverage_inside": self.coverage_inside,
            "coverage_outside": self.coverage_outside,
            "coverage_all": self.coverage_all,
            "per_category": [vars(c).copy() for c in self.per_category],
        }


def union_area(boxes: np.ndarray) -> float:
    """Exact area of a union of boxes by coordinate compression."""
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    if boxes.shape[0] == 0:
        return 0.0
    xs = np.unique(boxes[:, [0, 2]])
    ys = np.unique(boxes[:, [1, 3]])
    covered = np.zeros((ys.size - 1, xs.size - 1), dtype=bool)
    for x0, y0, x1, y1 in boxes:
        i0, i1 = np.searchsorted(xs, [x0, x1])
        j0, j1 = np.searchsorted(ys, [y0, y1])
        covered[j0:j1, i0:i1] = True
    cell = np.outer(np.diff(ys), np.diff(xs))
    return float(cell[covered].sum())


def annotation_stats(d: Dataset, split: Iterable[int]) -> StatsReport:
    split = frozenset(int(s) for s in split)
    unknown = split - set(d.category_by_id)
    if unknown:
        raise DatasetError(f"unknown category ids {sorted(unknown)}")
    counts = {c.id: 0 for c in d.categories}
    rel = {c.id: [] for c in d.categories}
    for g in d.instances:
        im = d.image_by_id[g.image_id]
        counts[g.category_id] += 1
        rel[g.category_id].append(g.box.width * g.box.height / (im.width * im.height))
    rows = []
    for c in sorted(d.categories, key=lambda c: c.id):
        r = rel[c.id]
        rows.append(CategoryStats(
            id=c.id, name=c.name, count=counts[c.id],
            mean_relative_area=float(np.mean(r)) if r else None,
            mean_sqrt_relative_area=float(np.mean(np.sqrt(r))) if r else None,
            in_split=c.id in split,
        ))

    def coverage(pred):
        if not d.images:
            return 0.0
        fr = []
        for im in sorted(d.images, key=lambda i: i.image_id):
            bx = [g.box.as_tuple() for g in d.instances_by_image[im.image_id] if pred(g.category_id)]
            fr.append(union_area(np.array(bx).reshape(-1, 4)) / (im.width * im.height))
        return float(np.mean(fr))

    inside = sum(counts[c] for c in split)
    return StatsReport(
        inside_instances=inside,
        outside_instances=len(d.instances) - inside,
        per_category=rows,
        coverage_inside=coverage(lambda c: c in split),
        coverage_outside=coverage(lambda c: c not in split),
        coverage_all=coverage(lambda c: True),
    )


# --------------------------------------------------------------------------
# Parsers


def _clip_to_image(box: tuple, width: int, height: int, where: str, slack: float = 0.0) -> BoundingBox:
    x0, y0, x1, y1 = box
    over = max(-x0, -y0, x1 - width, y1 - height)
    if over > 0:
        # VOC "+1" conversion routinely overshoots the far edge by one pixel
        (log.debug if over <= slack else log.warning)(
            "%s: box %s extends past image %dx%d; clipped", where, box, width, height
        )
        x0, y0 = max(x0, 0.0), max(y0, 0.0)
        x1, y1 = min(x1, float(width)), min(y1, float(height))
    try:
        return BoundingBox(float(x0), float(y0), float(x1), float(y1))
    except InvalidBoxError as e:
        raise ParseError(f"{where}: box {box} is empty inside image {width}x{height} ({e})") from None


class _CategoryTable:
    """Assigns dense ids to category names in first-appearance order."""

    def __init__(self):
        self.cats: list[Category] = []
        self.by_name: dict[str, int] = {}

    def get(self, name: str, supercategory: str | None = None) -> int:
        if name not in self.by_name:
            self.by_name[name] = len(self.cats)
            self.cats.append(Category(len(self.cats), name, supercategory))
        return self.by_name[name]


def _xml_text(node, path, where):
    el = node.find(path)
    if el is None or el.text is None or not el.text.strip():
        raise ParseError(f"{where}: missing required element <{path}>")
    return el.text.strip()


def _xml_number(node, path, where, kind=float):
    text = _xml_text(node, path, where)
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"{where}: <{path}> is not a number: {text!r}") from None
    if kind is int:
        if v != int(v):
            raise ParseError(f"{where}: <{path}> is not an integer: {text!r}")
        return int(v)
    return v


def parse_voc_annotations(documents: Iterable, exclusive: bool = False) -> Dataset:
    """Parse VOC detection XML documents into a :class:`Dataset`.

    ``documents`` holds file paths or ``(name, xml_text)`` pairs and is read
    in the given order; categories get ids by first appearance. VOC boxes are
    inclusive 1-based pixel ranges, converted with ``x_max = xmax + 1`` so
    that VOC areas are kept; pass ``exclusive=True`` for sources whose
    coordinates are already half-open.
    """
    cats = _CategoryTable()
    images, instances = [], []
    for doc in documents:
        if isinstance(doc, (str, os.PathLike)):
            name, text = str(doc), Path(doc).read_bytes()
        else:
            name, text = doc
        try:
            root = ET.fromstring(text)
        except ET.ParseError as e:
            raise ParseError(f"{name}: malformed XML ({e})") from None
        filename = _xml_text(root, "filename", name)
        image_id = Path(filename).stem
        width = _xml_number(root, "size/width", name, int)
        height = _xml_number(root, "size/height", name, int)
        try:
            images.append(ImageRecord(image_id, width, height))
        except DatasetError as e:
            raise ParseError(f"{name}: <size> {e}") from None
        for k, obj in enumerate(root.findall("object")):
            where = f"{name}: <object> #{k}"
            cname = _xml_text(obj, "name", where)
            coords = [_xml_number(obj, f"bndbox/{t}", where) for t in ("xmin", "ymin", "xmax", "ymax")]
            x0, y0, x1, y1 = coords
            if not exclusive:
                x1, y1 = x1 + 1.0, y1 + 1.0
            box = _clip_to_image((x0, y0, x1, y1), width, height, where, slack=0.0 if exclusive else 1.0)
            instances.append(GroundTruthInstance(len(instances), image_id, cats.get(cname), box))
    try:
        return Dataset(images, cats.cats, instances)
    except DatasetError as e:
        raise ParseError(str(e)) from None


def parse_voc_directory(path, exclusive: bool = False) -> Dataset:
    files = sorted(Path(path).glob("*.xml"))
    if not files:
        raise ParseError(f"{path}: no .xml files found")
    return parse_voc_annotations(files, exclusive=exclusive)


def parse_coco_annotations(doc: Mapping, name: str = "<coco>") -> Dataset:
    """Parse a COCO-style detection document.

    COCO ``[x, y, w, h]`` boxes become ``(x, y, x + w, y + h)``. Category ids
    are renumbered densely in the order the categories are listed; image ids
    become strings.
    """
    for key in ("images", "annotations", "categories"):
        if not isinstance(doc.get(key), list):
            raise ParseError(f"{name}: missing array {key!r}")
    cats = _CategoryTable()
    cat_map = {}
    for c in doc["categories"]:
        try:
            cid, cname = c["id"], c["name"]
        except KeyError as e:
            raise ParseError(f"{name}: category missing field {e}") from None
        if cid in cat_map:
            raise ParseError(f"{name}: duplicate category id {cid}")
        if cname in cats.by_name:
            raise ParseError(f"{name}: duplicate category name {cname!r}")
        cat_map[cid] = cats.get(str(cname), c.get("supercategory"))
    images = {}
    for im in doc["images"]:
        try:
            iid, w, h = im["id"], im["width"], im["height"]
        except KeyError as e:
            raise ParseError(f"{name}: image missing field {e}") from None
        if str(iid) in images:
            raise ParseError(f"{name}: duplicate image id {iid}")
        try:
            images[str(iid)] = ImageRecord(str(iid), int(w), int(h))
        except (DatasetError, TypeError, ValueError) as e:
            raise ParseError(f"{name}: image {iid}: {e}") from None
    instances, seen = [], set()
    for a in doc["annotations"]:
        aid = a.get("id")
        where = f"{name}: annotation {aid}"
        if aid is None:
            raise ParseError(f"{name}: annotation without id")
        if aid in seen:
            raise ParseError(f"{name}: duplicate annotation id {aid}")
        seen.add(aid)
        iid = str(a.get("image_id"))
        if iid not in images:
            raise ParseError(f"{where}: unknown image_id {a.get('image_id')!r}")
        if a.get("category_id") not in cat_map:
            raise ParseError(f"{where}: unknown category_id {a.get('category_id')!r}")
        bbox = a.get("bbox")
        if not (isinstance(bbox, list) and len(bbox) == 4):
            raise ParseError(f"{where}: bbox must be [x, y, w, h]")
        try:
            x, y, w, h = (float(v) for v in bbox)
        except (TypeError, ValueError):
            raise ParseError(f"{where}: non-numeric bbox {bbox}") from None
        if not (w > 0 and h > 0):
            raise ParseError(f"{where}: zero-width or zero-height bbox {bbox}")
        im = images[iid]
        box = _clip_to_image((x, y, x + w, y + h), im.width, im.height, where)
        instances.append(GroundTruthInstance(int(aid), iid, cat_map[a["category_id"]], box))
    try:
        return Dataset(list(images.values()), cats.cats, instances)
    except DatasetError as e:
        raise ParseError(f"{name}: {e}") from None


# --------------------------------------------------------------------------
# Canonical JSON


def _dump_array(key, items, last=False):
    if not items:
        body = f'  "{key}": []'
    else:
        rows = ",\n".join("    " + json.dumps(it) for it in items)
        body = f'  "{key}": [\n{rows}\n  ]'
    return body + ("" if last else ",")


def dataset_to_canonical(d: Dataset) -> str:
    """Serialize to the canonical JSON text (fixed key order, arrays sorted by id)."""
    images = [
        {"id": im.image_id, "width": im.width, "height": im.height}
        for im in sorted(d.images, key=lambda i: i.image_id)
    ]
    cats = [
        {"id": c.id, "name": c.name, "supercategory": c.supercategory}
        for c in sorted(d.categories, key=lambda c: c.id)
    ]
    anns = [
        {"id": g.instance_id, "image_id": g.image_id, "category_id": g.category_id,
         "bbox": list(g.box.as_tuple())}
        for g in sorted(d.instances, key=lambda g: g.instance_id)
    ]
    lines = [
        "{",
        _dump_array("images", images),
        _dump_array("categories", cats),
        f'  "annotated_categories": {json.dumps(sorted(d.annotated_categories))},',
        _dump_array("annotations", anns, last=True),
        "}",
    ]
    return "\n".join(lines) + "\n"


def dataset_from_canonical(doc: Mapping, name: str = "<canonical>") -> Dataset:
    for key in ("images", "categories", "annotated_categories", "annotations"):
        if not isinstance(doc.get(key), list):
            raise ParseError(f"{name}: missing array {key!r}")
    try:
        images = [ImageRecord(str(i["id"]), int(i["width"]), int(i["height"])) for i in doc["images"]]
        cats = [Category(int(c["id"]), str(c["name"]), c.get("supercategory")) for c in doc["categories"]]
    except (KeyError, TypeError, ValueError, DatasetError) as e:
        raise ParseError(f"{name}: {type(e).__name__}: {e}") from None
    instances = []
    for a in doc["annotations"]:
        where = f"{name}: annotation {a.get('id')}"
        try:
            box = BoundingBox(*(float(v) for v in a["bbox"]))
            instances.append(GroundTruthInstance(int(a["id"]), str(a["image_id"]), int(a["category_id"]), box))
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"{where}: {e}") from None
    try:
        return Dataset(images, cats, instances, frozenset(doc["annotated_categories"]))
    except DatasetError as e:
        raise ParseError(f"{name}: {e}") from None


def save_dataset(d: Dataset, path) -> None:
    Path(path).write_text(dataset_to_canonical(d), encoding="utf-8")


def dataset_to_coco(d: Dataset) -> dict:
    return {
        "images": [
            {"id": im.image_id, "width": im.width, "height": im.height}
            for im in sorted(d.images, key=lambda i: i.image_id)
        ],
        "annotations": [
            {"id": g.instance_id, "image_id": g.image_id, "category_id": g.category_id,
             "bbox": [g.box.x_min, g.box.y_min, g.box.width, g.box.height]}
            for g in sorted(d.instances, key=lambda g: g.instance_id)
        ],
        "categories": [
            {"id": c.id, "name": c.name, "supercategory": c.supercategory}
            for c in sorted(d.categories, key=lambda c: c.id)
        ],
    }


def load_dataset(path, fmt: str = "auto", voc_exclusive: bool = False) -> Dataset:
    """Load a dataset from canonical JSON, COCO JSON, or a directory of VOC XML."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: no such file or directory")
    if fmt == "voc" or (fmt == "auto" and path.is_dir()):
        return parse_voc_directory(path, exclusive=voc_exclusive)
    if fmt == "voc-file":
        return parse_voc_annotations([path], exclusive=voc_exclusive)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno}: invalid JSON ({e.msg})") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    if fmt == "canonical" or (fmt == "auto" and "annotated_categories" in doc):
        return dataset_from_canonical(doc, str(path))
    if fmt in ("coco", "auto"):
        return parse_coco_annotations(doc, str(path))
    raise ValueError(f"unknown dataset format {fmt!r}")


# --------------------------------------------------------------------------
# Proposal files

CSV_HEADER = ["image_id", "x_min", "y_min", "x_max", "y_max", "score"]


def _fmt(v: float) -> str:
    return repr(float(v))


def proposals_to_csv(p: ProposalSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for image_id in p.image_ids():
        ip = p.per_image[image_id]
        for b, s in zip(ip.boxes.tolist(), ip.scores.tolist()):
            w.writerow([image_id, *map(_fmt, b), _fmt(s)])
    return buf.getvalue()


def proposals_to_json(p: ProposalSet) -> str:
    doc = {
        "method": p.method_name,
        "images": [
            {"image_id": k, "boxes": p.per_image[k].boxes.tolist(), "scores": p.per_image[k].scores.tolist()}
            for k in p.image_ids()
        ],
    }
    return json.dumps(doc) + "\n"


def save_proposals(p: ProposalSet, path, fmt: str | None = None) -> None:
    fmt = fmt or Path(path).suffix.lstrip(".").lower()
    if fmt == "csv":
        text = proposals_to_csv(p)
    elif fmt == "json":
        text = proposals_to_json(p)
    else:
        raise ValueError(f"unknown proposal format {fmt!r}")
    Path(path).write_text(text, encoding="utf-8")


def _parse_proposal_csv(text: str, name: str) -> dict[str, list]:
    rows: dict[str, list] = {}
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != CSV_HEADER:
        raise ParseError(f"{name}:1: expected header {','.join(CSV_HEADER)}")
    for row in reader:
        lineno = reader.line_num
        if not row:
            continue
        if len(row) != 6:
            raise ParseError(f"{name}:{lineno}: expected 6 fields, got {len(row)}")
        try:
            vals = [float(v) for v in row[1:]]
        except ValueError:
            raise ParseError(f"{name}:{lineno}: non-numeric field in {row}") from None
        if not all(math.isfinite(v) for v in vals) or not (vals[2] > vals[0] and vals[3] > vals[1]):
            raise ParseError(f"{name}:{lineno}: invalid box or score {row[1:]}")
        rows.setdefault(row[0], []).append(vals)
    return rows


def load_proposals(path, fmt: str | None = None, method_name: str | None = None) -> ProposalSet:
    """Read a proposal file; rows of one image need not be contiguous.

    Source ranks are the row order of each image within the file.
    """
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"{path}: no such file") from None
    if fmt == "csv":
        rows = _parse_proposal_csv(text, str(path))
        arrays = {}
        for k, v in rows.items():
            a = np.array(v, dtype=np.float64)
            arrays[k] = (a[:, :4], a[:, 4])
        return ProposalSet.from_arrays(method_name or path.stem, arrays)
    if fmt == "json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}:{e.lineno}: invalid JSON ({e.msg})") from None
        arrays = {}
        for k, entry in enumerate(doc.get("images", [])):
            try:
                boxes = np.array(entry["boxes"], dtype=np.float64).reshape(-1, 4)
                scores = np.array(entry["scores"], dtype=np.float64).reshape(-1)
                validate_box_array(boxes)
            except (KeyError, ValueError, TypeError) as e:
                raise ParseError(f"{path}: images[{k}]: {e}") from None
            if entry["image_id"] in arrays:
                raise ParseError(f"{path}: images[{k}]: duplicate image_id {entry['image_id']!r}")
            arrays[str(entry["image_id"])] = (boxes, scores)
        try:
            return ProposalSet.from_arrays(method_name or doc.get("method") or path.stem, arrays)
        except ValueError as e:
            raise ParseError(f"{path}: {e}") from None
    raise ValueError(f"unknown proposal format {fmt!r}")


def scored_boxes_from_tuples(rows: Sequence[tuple]) -> list[ScoredBox]:
    """``(x_min, y_min, x_max, y_max, score)`` rows to ScoredBox, rank = position."""
    return [ScoredBox(BoundingBox(*r[:4]), r[4], i) for i, r in enumerate(rows)]
