"""Config files (JSON, or TOML by suffix) and the JSON schemas they follow.

Each config file is a flat object holding the fields of one config type.
Every field is optional; omitted fields take the documented defaults, and the
resolved values are echoed into each report's manifest.
"""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from .metrics import EvaluationConfig
from .proposers import DmpConfig
from .synth import SynthConfig


class ConfigError(ValueError):
    pass


_num_list = {"type": "array", "items": {"type": "number"}}
_int_list = {"type": "array", "items": {"type": "integer"}}
_pair = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

EVALUATION_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "EvaluationConfig",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "iou_thresholds": {**_num_list, "minItems": 1},
        "proposal_budgets": {**_int_list, "minItems": 1},
        "threshold_comparison": {"enum": ["strict_greater", "greater_equal"]},
        "auc_threshold_range": _pair,
        "auc_grid_step": {"type": "number", "exclusiveMinimum": 0},
        "ar_grid_step": {"type": "number", "exclusiveMinimum": 0},
        "budget_axis": {"enum": ["linear", "log"]},
        "matching": {"enum": ["independent", "one_to_one"]},
        "report_thresholds": _num_list,
    },
}

SYNTH_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "SynthConfig",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer"},
        "num_images": {"type": "integer", "minimum": 1},
        "image_size": {**_int_list, "minItems": 2, "maxItems": 2},
        "num_categories": {"type": "integer", "minimum": 1},
        "category_frequency_weights": {"anyOf": [_num_list, {"type": "null"}]},
        "category_size_params": {"anyOf": [{"type": "array", "items": _pair}, {"type": "null"}]},
        "instances_per_image": {**_int_list, "minItems": 2, "maxItems": 2},
        "annotated_fraction_of_categories": {"type": "number"},
    },
}

DMP_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "DmpConfig",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seen_categories": _int_list,
        "hit_rate": {"type": "number", "minimum": 0, "maximum": 1},
        "jitter_sigma": {"type": "number", "minimum": 0},
        "false_positive_rate": {"type": "number", "minimum": 0},
        "nms_threshold": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "budget": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
    },
}


def read_config_file(path) -> dict:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    try:
        if path.suffix.lower() == ".toml":
            doc = tomllib.loads(raw.decode("utf-8"))
        else:
            doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno}: invalid JSON ({e.msg})") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: invalid TOML ({e})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def _validate(doc, schema, where):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as e:
        loc = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {loc}: {e.message}") from None


def _build(cls, schema, path, overrides=None):
    doc = read_config_file(path) if path else {}
    _validate(doc, schema, path or "<defaults>")
    doc.update(overrides or {})
    try:
        return cls.from_dict(doc)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{path or '<defaults>'}: {e}") from None


def load_evaluation_config(path=None, **overrides) -> EvaluationConfig:
    return _build(EvaluationConfig, EVALUATION_SCHEMA, path, overrides)


def load_synth_config(path=None, **overrides) -> SynthConfig:
    return _build(SynthConfig, SYNTH_SCHEMA, path, overrides)


def load_dmp_config(path=None, **overrides) -> DmpConfig:
    return _build(DmpConfig, DMP_SCHEMA, path, overrides)
