"""JSON schemas of the CLI documents, shipped under ``binspatial/schemas``."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema

SCHEMAS = {
    "scene": "scene_spec.schema.json",
    "metric_report": "metric_report.schema.json",
    "gradcheck_report": "gradcheck_report.schema.json",
    "fit_result": "fit_result.schema.json",
}


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("binspatial").joinpath("schemas", SCHEMAS[name]).read_text(encoding="utf-8")
    return json.loads(text)


def validate(document, name: str) -> None:
    """Raise ``jsonschema.ValidationError`` unless ``document`` matches schema ``name``."""
    jsonschema.validate(document, load_schema(name), cls=jsonschema.Draft202012Validator)
