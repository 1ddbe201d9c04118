"""Two-level stacking: level-1 models fitted on train, the combiner on their validation predictions."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import learners
from .ingest import Dataset, FeatureSchema
from .learners import Frame, LearnerError, RegressorSpec, SchemaMismatchError, TrainedRegressor
from .learners.persist import atomic_write_text, model_document, model_from_document

ENSEMBLE_FORMAT = "eta-stack/ensemble"
ENSEMBLE_VERSION = 1
L2_HOLDOUT_FRACTION = 0.1


class StackingError(Exception):
    pass


class PersistenceError(Exception):
    pass


@dataclass
class StackedEnsemble:
    l1_models: list[TrainedRegressor]
    l2_model: TrainedRegressor
    schema: FeatureSchema
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.l1_models) < 2:
            raise StackingError("a stacked ensemble needs at least two level-1 models")
        if len(set(self.l1_names)) != len(self.l1_names):
            raise StackingError(f"level-1 model names must be unique: {self.l1_names}")
        if self.l2_model.input_names != self.l1_names:
            raise StackingError("level-2 inputs must be the level-1 outputs in level-1 order")

    @property
    def l1_names(self) -> list[str]:
        return [m.name for m in self.l1_models]

    @property
    def name(self) -> str:
        return self.l2_model.name

    @property
    def fingerprint(self) -> str:
        return self.schema.fingerprint()

    def _matrix(self, X, schema: FeatureSchema | None):
        if isinstance(X, Dataset):
            schema, X = X.schema, X.X
        if schema is not None and schema.fingerprint() != self.fingerprint:
            raise SchemaMismatchError(
                f"input schema {schema.fingerprint()} does not match ensemble schema {self.fingerprint}")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.schema):
            raise SchemaMismatchError(f"expected {len(self.schema)} schema columns, got {X.shape[1]}")
        return X

    def level1(self, X, schema: FeatureSchema | None = None) -> np.ndarray:
        """Level-1 predictions, one column per model in ensemble order."""
        X = self._matrix(X, schema)
        return np.column_stack([m.predict(X) for m in self.l1_models])

    def predict(self, X, schema: FeatureSchema | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(y_l2, y_l1)`` for a batch of schema-ordered rows."""
        P = self.level1(X, schema)
        return self.l2_model.predict(P), P

    def __call__(self, X) -> np.ndarray:
        return self.predict(X)[0]


def predict_stacked(ensemble: StackedEnsemble, x, schema: FeatureSchema | None = None):
    """Final and intermediate prediction for one feature vector (or a batch)."""
    x = np.asarray(x, dtype=float)
    y2, P = ensemble.predict(x, schema)
    if x.ndim == 1:
        return float(y2[0]), P[0]
    return y2, P


def _split_hash(ds: Dataset) -> str:
    h = hashlib.sha256()
    for r in sorted(ds.row_hashes()):
        h.update(r.encode())
    return h.hexdigest()[:16]


def fit_level1(train: Dataset, validation: Dataset, l1_specs: list[RegressorSpec]) -> list[TrainedRegressor]:
    models = []
    for spec in l1_specs:
        try:
            models.append(learners.fit(spec, train, validation))
        except Exception as exc:
            raise StackingError(f"level-1 fit failed for {spec.name!r} ({spec.family}): {exc}") from exc
    return models


def level2_frame(l1_models: list[TrainedRegressor], validation: Dataset) -> Frame:
    P = np.column_stack([m.predict(validation.X) for m in l1_models])
    return Frame(P, validation.y.copy(), [m.name for m in l1_models])


def fit_level2(frame: Frame, spec: RegressorSpec) -> TrainedRegressor:
    if spec.family != "feedforward_net":
        return learners.fit(spec, frame)
    # best-epoch selection needs held-out rows; take a seeded 10% of the level-2 rows
    n = len(frame.y)
    perm = np.random.default_rng(spec.seed).permutation(n)
    n_hold = max(1, int(round(L2_HOLDOUT_FRACTION * n)))
    hold, fit_rows = np.sort(perm[:n_hold]), np.sort(perm[n_hold:])
    if fit_rows.size == 0:
        raise StackingError("too few level-2 rows for the network holdout")
    tr = Frame(frame.X[fit_rows], frame.y[fit_rows], frame.names)
    ho = Frame(frame.X[hold], frame.y[hold], frame.names)
    return learners.fit(spec, tr, ho)


def train_stacked_ensembles(train: Dataset, validation: Dataset, l1_specs: list[RegressorSpec],
                            l2_specs: list[RegressorSpec]) -> list[StackedEnsemble]:
    """Fit the level-1 models once and one ensemble per level-2 alternative."""
    if len(l1_specs) < 2:
        raise StackingError("need at least two level-1 specs")
    if train.schema.fingerprint() != validation.schema.fingerprint():
        raise SchemaMismatchError("train and validation schemas differ")
    if train.row_hashes() & validation.row_hashes():
        raise StackingError("train and validation share rows")
    l1 = fit_level1(train, validation, l1_specs)
    frame = level2_frame(l1, validation)
    prov = {
        "l1_specs": [s.to_dict() for s in l1_specs],
        "n_train": len(train), "n_validation": len(validation),
        "split_hashes": {"train": _split_hash(train), "validation": _split_hash(validation)},
    }
    out = []
    for spec in l2_specs:
        l2 = fit_level2(frame, spec)
        out.append(StackedEnsemble(l1, l2, train.schema, dict(prov, l2_spec=spec.to_dict())))
    return out


def train_stacked_ensemble(train: Dataset, validation: Dataset, l1_specs: list[RegressorSpec],
                           l2_spec: RegressorSpec) -> StackedEnsemble:
    return train_stacked_ensembles(train, validation, l1_specs, [l2_spec])[0]


# persistence

def ensemble_document(ensembles) -> dict:
    if isinstance(ensembles, StackedEnsemble):
        ensembles = [ensembles]
    first = ensembles[0]
    for e in ensembles[1:]:
        if any(a is not b for a, b in zip(e.l1_models, first.l1_models)) or len(e.l1_models) != len(first.l1_models):
            raise PersistenceError("ensembles saved together must share their level-1 models")
    fp = first.fingerprint
    return {
        "format": ENSEMBLE_FORMAT,
        "version": ENSEMBLE_VERSION,
        "schema": first.schema.to_dict(),
        "schema_fingerprint": fp,
        "l1_models": [model_document(m, fp) for m in first.l1_models],
        "l2_models": [model_document(e.l2_model) for e in ensembles],
        "provenance": [e.provenance for e in ensembles],
    }


def save(ensembles, path) -> None:
    """Write one ensemble, or several sharing level-1 models, as one JSON document."""
    atomic_write_text(path, json.dumps(ensemble_document(ensembles), sort_keys=True))


def ensembles_from_document(doc: dict, expected_fingerprint: str | None = None) -> list[StackedEnsemble]:
    if doc.get("format") != ENSEMBLE_FORMAT:
        raise PersistenceError(f"not an ensemble document (format={doc.get('format')!r})")
    if doc.get("version") != ENSEMBLE_VERSION:
        raise PersistenceError(f"unsupported ensemble document version {doc.get('version')!r}, "
                               f"expected {ENSEMBLE_VERSION}")
    schema = FeatureSchema.from_dict(doc["schema"])
    fp = schema.fingerprint()
    if fp != doc["schema_fingerprint"]:
        raise PersistenceError("embedded schema does not match its recorded fingerprint")
    if expected_fingerprint is not None and fp != expected_fingerprint:
        raise SchemaMismatchError(f"ensemble schema fingerprint {fp} != expected {expected_fingerprint}")
    l1 = [model_from_document(d, fp) for d in doc["l1_models"]]
    return [StackedEnsemble(l1, model_from_document(d), schema, prov)
            for d, prov in zip(doc["l2_models"], doc["provenance"])]


def load_all(path, expected_fingerprint: str | None = None) -> list[StackedEnsemble]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PersistenceError(f"{path}: cannot parse ensemble document ({exc})") from None
    except (KeyError, TypeError) as exc:
        raise PersistenceError(f"{path}: malformed ensemble document ({exc})") from None
    try:
        return ensembles_from_document(doc, expected_fingerprint)
    except (KeyError, TypeError, LearnerError) as exc:
        if isinstance(exc, SchemaMismatchError):
            raise
        raise PersistenceError(f"{path}: malformed ensemble document ({exc})") from None


def load(path, expected_fingerprint: str | None = None, l2: str | None = None) -> StackedEnsemble:
    """Load one ensemble; ``l2`` picks a level-2 alternative by name (default: the first)."""
    ens = load_all(path, expected_fingerprint)
    if l2 is None:
        return ens[0]
    for e in ens:
        if e.name == l2:
            return e
    raise PersistenceError(f"no level-2 model named {l2!r}; have {[e.name for e in ens]}")
