"""Standalone model documents with an embedded schema fingerprint."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from . import model_from_dict
from .base import LearnerError, SchemaMismatchError, TrainedRegressor


def names_fingerprint(names) -> str:
    """Fingerprint of a plain column layout (e.g. level-2 inputs)."""
    return hashlib.sha256(json.dumps(list(names)).encode()).hexdigest()[:16]


def model_document(model: TrainedRegressor, schema_fingerprint: str | None = None) -> dict:
    doc = model.to_dict()
    doc["schema_fingerprint"] = schema_fingerprint or names_fingerprint(model.input_names)
    return doc


def model_from_document(doc: dict, expected_fingerprint: str | None = None) -> TrainedRegressor:
    got = doc.get("schema_fingerprint")
    if expected_fingerprint is not None and got != expected_fingerprint:
        raise SchemaMismatchError(
            f"model {doc.get('spec', {}).get('name')!r} was fitted against schema {got}, "
            f"refusing to load under schema {expected_fingerprint}")
    return model_from_dict(doc)


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(model: TrainedRegressor, path, schema_fingerprint: str | None = None) -> None:
    atomic_write_text(path, json.dumps(model_document(model, schema_fingerprint), sort_keys=True))


def load_model(path, expected_fingerprint: str | None = None) -> TrainedRegressor:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LearnerError(f"{path}: not a valid model document ({exc})") from None
    return model_from_document(doc, expected_fingerprint)
