"""Versioned JSON documents.

Every file written by the package is a JSON object carrying ``"v": 1`` and a
``"kind"`` tag. Output is canonical (sorted keys, fixed separators) so equal
inputs always produce byte-identical files.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .errors import SchemaError

SCHEMA_VERSION = 1


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_document(path: str | Path, kind: str, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"v": SCHEMA_VERSION, "kind": kind, **payload}
    path.write_text(dumps(doc) + "\n", encoding="utf-8")
    return path


def check_document(doc: Any, kind: str, source: str = "<memory>") -> dict:
    if not isinstance(doc, dict):
        raise SchemaError(f"{source}: expected a JSON object")
    if doc.get("v") != SCHEMA_VERSION:
        raise SchemaError(f"{source}: unsupported schema version {doc.get('v')!r}")
    if doc.get("kind") != kind:
        raise SchemaError(f"{source}: expected kind {kind!r}, found {doc.get('kind')!r}")
    return doc


def read_document(path: str | Path, kind: str) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return check_document(doc, kind, str(path))
