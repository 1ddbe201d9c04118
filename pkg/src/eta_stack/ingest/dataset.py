"""Datasets, train/validation/test splitting and CSV snapshots."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .records import TripRecord
from .schema import FeatureSchema, engineer_features

SPLITS = ("train", "validation", "test")


class EmptySplitError(ValueError):
    pass


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    schema: FeatureSchema
    split: str
    ids: np.ndarray = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.schema):
            raise ValueError(f"X must be n x {len(self.schema)}")
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y row counts differ")
        if self.ids is None:
            self.ids = np.arange(len(self.y), dtype=np.int64)
        self.ids = np.asarray(self.ids, dtype=np.int64)

    def __len__(self):
        return len(self.y)

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.schema.index(name)]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.X[rows], self.y[rows], self.schema, self.split, self.ids[rows])

    def row_hashes(self) -> set[str]:
        """Content hashes of (x, y) rows, used for leakage checks."""
        data = np.column_stack([self.X, self.y])
        return {hashlib.sha1(r.tobytes()).hexdigest() for r in np.ascontiguousarray(data)}


@dataclass(frozen=True)
class SplitSpec:
    """How to cut one trip set into train/validation/test.

    ``mode="time"``: test is every trip at or after ``boundary`` (dataset
    seconds); the earlier trips are shuffled and ``val_fraction`` of them go
    to validation. ``mode="random"``: seeded shuffle cut by ``fractions``.
    """

    mode: str = "time"
    boundary: Optional[float] = None
    val_fraction: float = 0.2
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("time", "random"):
            raise ValueError("split mode must be 'time' or 'random'")
        if self.mode == "time" and self.boundary is None:
            raise ValueError("time split needs a boundary timestamp")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")
        if self.mode == "random" and (not np.isclose(sum(self.fractions), 1.0) or min(self.fractions) < 0):
            raise ValueError("fractions must be non-negative and sum to 1")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "boundary": self.boundary, "val_fraction": self.val_fraction,
                "fractions": list(self.fractions), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SplitSpec":
        d = dict(d)
        if "fractions" in d:
            d["fractions"] = tuple(d["fractions"])
        return cls(**d)


def split_indices(pickup_time: np.ndarray, spec: SplitSpec) -> dict[str, np.ndarray]:
    """Row indices per split; disjoint and covering every row."""
    n = len(pickup_time)
    rng = np.random.default_rng(spec.seed)
    if spec.mode == "random":
        perm = rng.permutation(n)
        n_train = int(round(n * spec.fractions[0]))
        n_val = int(round(n * spec.fractions[1]))
        parts = {"train": perm[:n_train], "validation": perm[n_train:n_train + n_val],
                 "test": perm[n_train + n_val:]}
    else:
        late = pickup_time >= spec.boundary
        early_idx = np.flatnonzero(~late)
        perm = early_idx[rng.permutation(early_idx.size)]
        n_val = int(round(early_idx.size * spec.val_fraction))
        parts = {"train": perm[n_val:], "validation": perm[:n_val], "test": np.flatnonzero(late)}
    out = {}
    for name in SPLITS:
        idx = np.sort(parts[name])
        if idx.size == 0:
            raise EmptySplitError(f"{name} split is empty")
        out[name] = idx
    return out


def build_dataset(trips: list[TripRecord], schema: FeatureSchema, split_spec: SplitSpec
                  ) -> tuple[Dataset, Dataset, Dataset]:
    """Engineer features for every trip and split into (train, validation, test)."""
    if not trips:
        raise EmptySplitError("no trips to build a dataset from")
    X = engineer_features(trips, schema)
    y = np.array([t.duration for t in trips], dtype=float)
    ids = np.array([t.trip_id for t in trips], dtype=np.int64)
    times = np.array([t.pickup_time for t in trips], dtype=float)
    parts = split_indices(times, split_spec)
    return tuple(Dataset(X[idx], y[idx], schema, name, ids[idx]) for name, idx in parts.items())


def write_dataset_csv(path, ds: Dataset) -> None:
    """Snapshot: ``trip_id``, the schema columns in order, then ``y``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trip_id", *ds.schema.names, "y"])
        for i, row, target in zip(ds.ids, ds.X, ds.y):
            w.writerow([int(i), *(repr(float(v)) for v in row), repr(float(target))])


def read_dataset_csv(path, schema: FeatureSchema, split: str) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[1:-1] != schema.names or header[0] != "trip_id" or header[-1] != "y":
            raise ValueError(f"{path}: header does not match the schema")
        rows = [r for r in reader]
    if not rows:
        raise EmptySplitError(f"{path} holds no rows")
    arr = np.array(rows, dtype=float)
    return Dataset(arr[:, 1:-1], arr[:, -1], schema, split, arr[:, 0].astype(np.int64))


@dataclass
class DatasetBundle:
    train: Dataset
    validation: Dataset
    test: Dataset
    meta: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.train, self.validation, self.test))


def save_bundle(directory, bundle: DatasetBundle) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for ds in bundle:
        write_dataset_csv(d / f"{ds.split}.csv", ds)
    sidecar = dict(bundle.meta)
    sidecar["schema"] = bundle.train.schema.to_dict()
    sidecar["schema_fingerprint"] = bundle.train.schema.fingerprint()
    sidecar["sizes"] = {ds.split: len(ds) for ds in bundle}
    (d / "dataset.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_bundle(directory) -> DatasetBundle:
    d = Path(directory)
    meta = json.loads((d / "dataset.json").read_text())
    schema = FeatureSchema.from_dict(meta["schema"])
    parts = [read_dataset_csv(d / f"{s}.csv", schema, s) for s in SPLITS]
    return DatasetBundle(*parts, meta=meta)
