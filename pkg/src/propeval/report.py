"""Report files: JSON with an embedded run manifest, flat CSV, and static SVG plots."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

import jsonschema

from . import __version__
from .metrics import CurveResult

MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["command", "tool_version", "config", "inputs", "seeds"],
    "additionalProperties": False,
    "properties": {
        "command": {"type": "string"},
        "tool_version": {"type": "string"},
        "config": {"type": "object"},
        "inputs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["path", "sha256"],
                "properties": {"path": {"type": "string"}, "sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"}},
            },
        },
        "seeds": {"type": "array", "items": {"type": "integer"}},
    },
}

_CURVE = {
    "type": "object",
    "required": ["x_label", "y_label", "points"],
    "properties": {"points": {"type": "array", "items": {"type": "array", "minItems": 2, "maxItems": 2}}},
}

REPORT_SCHEMAS = {
    "eval": {
        "required": ["manifest", "methods"],
        "properties": {"methods": {"type": "array", "items": {
            "type": "object", "required": ["method", "num_instances", "per_budget", "curves"],
            "properties": {"curves": {"type": "array", "items": _CURVE}},
        }}},
    },
    "gameability": {"required": ["manifest", "rows", "rankings", "inversions", "budgets", "methods"]},
    "bias-capacity": {"required": ["manifest", "results"]},
    "synth": {"required": ["manifest", "num_images", "num_instances_full", "num_instances_partial"]},
    "stats": {"required": ["manifest", "inside_instances", "outside_instances", "per_category"]},
    "finegrained": {"required": ["manifest", "rows", "key"]},
}


def report_schema(kind: str) -> dict:
    body = REPORT_SCHEMAS[kind]
    props = {"manifest": MANIFEST_SCHEMA, **body.get("properties", {})}
    return {"$schema": "https://json-schema.org/draft/2020-12/schema", "type": "object",
            "required": body["required"], "properties": props}


def validate_report(doc: dict, kind: str) -> None:
    """Raise ``jsonschema.ValidationError`` if ``doc`` is not a valid ``kind`` report."""
    jsonschema.validate(doc, report_schema(kind))


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: list[str] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        files = []
        for p in self.inputs:
            for f in sorted(Path(p).glob("*.xml")) if Path(p).is_dir() else [Path(p)]:
                files.append({"path": str(f) if Path(p).is_dir() else p, "sha256": file_digest(f)})
        return {
            "command": self.command,
            "tool_version": __version__,
            "config": self.config,
            "inputs": files,
            "seeds": [int(s) for s in self.seeds],
        }


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_json(path, doc) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def curve_rows(curves: Iterable[CurveResult], extra: Sequence = ()):
    """One CSV row per curve point."""
    for c in curves:
        for x, y in c.points:
            yield [*extra, c.method_name, c.x_label, c.y_label, x, y]


CURVE_HEADER = ["method", "x_label", "y_label", "x", "y"]


def safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name) or "unnamed"


def write_svg(path, panels: Sequence[tuple[str, Sequence[CurveResult], bool]]) -> None:
    """Line plots, one panel per ``(title, curves, log_x)``, with the data embedded.

    The plotted points are stored as CSV inside the SVG ``<desc>`` element.
    Output is byte-stable for a fixed matplotlib version.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "propeval", "svg.fonttype": "none"}):
        fig, axes = plt.subplots(1, len(panels), figsize=(5 * len(panels), 4), squeeze=False)
        for ax, (title, curves, log_x) in zip(axes[0], panels):
            for c in curves:
                ax.plot(c.x, c.y, marker="o", ms=3, label=c.method_name or c.y_label)
            if log_x:
                ax.set_xscale("log")
            if curves:
                ax.set_xlabel(curves[0].x_label)
                ax.set_ylabel(curves[0].y_label)
            ax.set_title(title)
            ax.grid(True, alpha=0.3)
            if len(curves) > 1:
                ax.legend(fontsize=7)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": f"propeval {__version__}"})
        plt.close(fig)
    table = io.StringIO()
    w = csv.writer(table, lineterminator="\n")
    w.writerow(["panel", *CURVE_HEADER])
    for title, curves, _ in panels:
        for row in curve_rows(curves, extra=[title]):
            w.writerow(row)
    svg = buf.getvalue()
    m = re.search(r"<svg[^>]*>", svg)
    svg = svg[: m.end()] + "\n <desc>" + escape(table.getvalue()) + "</desc>" + svg[m.end():]
    Path(path).write_text(svg, encoding="utf-8")
