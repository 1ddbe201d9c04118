"""Explanation vectors and the background data both explainers perturb against."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class Explanation:
    """Per-feature attributions for one prediction.

    ``base_value`` is the expected model output over the background for
    SHAP; for LIME it is the surrogate's value at the background mean, so
    in both cases ``base_value + attributions.sum()`` approximates f(x).
    """

    attributions: np.ndarray
    feature_names: list[str]
    values: np.ndarray
    method: str
    sample_id: Optional[int] = None
    base_value: Optional[float] = None
    prediction: Optional[float] = None
    model: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.attributions = np.asarray(self.attributions, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.feature_names = list(self.feature_names)
        if self.attributions.shape != (len(self.feature_names),):
            raise ValueError("attribution length must equal the feature-name list length")
        if self.values.shape != self.attributions.shape:
            raise ValueError("feature values and attributions differ in length")

    def __getitem__(self, name: str) -> float:
        return float(self.attributions[self.feature_names.index(name)])

    def to_dict(self) -> dict:
        d = {
            "method": self.method,
            "model": self.model,
            "sample_id": None if self.sample_id is None else int(self.sample_id),
            "base_value": self.base_value,
            "prediction": self.prediction,
            "features": [{"name": n, "value": float(v), "attribution": float(a)}
                         for n, v, a in zip(self.feature_names, self.values, self.attributions)],
        }
        if self.extra:
            d["extra"] = self.extra
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Explanation":
        feats = d["features"]
        return cls(
            np.array([f["attribution"] for f in feats], dtype=float),
            [f["name"] for f in feats],
            np.array([f["value"] for f in feats], dtype=float),
            d["method"], d.get("sample_id"), d.get("base_value"), d.get("prediction"),
            d.get("model", ""), d.get("extra", {}),
        )


LONG_HEADER = ["sample_id", "method", "model", "feature", "value", "attribution"]


def explanations_long_csv(explanations: list[Explanation]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LONG_HEADER)
    for e in explanations:
        for n, v, a in zip(e.feature_names, e.values, e.attributions):
            w.writerow([e.sample_id, e.method, e.model, n, repr(float(v)), repr(float(a))])
    return buf.getvalue()


@dataclass
class BackgroundSet:
    """Reference rows for masking plus per-feature statistics for perturbation."""

    rows: np.ndarray
    feature_names: list[str]
    mean: np.ndarray
    std: np.ndarray
    quantiles: np.ndarray  # 3 x m: 25%, 50%, 75%

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if self.rows.shape[0] < 1:
            raise ValueError("background needs at least one row")
        if self.rows.shape[1] != len(self.feature_names):
            raise ValueError("background columns must align with the feature names")

    @property
    def k(self) -> int:
        return self.rows.shape[0]

    @classmethod
    def from_data(cls, X, feature_names, k: int = 100, seed: int = 0) -> "BackgroundSet":
        """``k`` seeded rows of ``X``; statistics from all of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        rng = np.random.default_rng(seed)
        take = rng.choice(X.shape[0], size=min(k, X.shape[0]), replace=False)
        return cls(X[np.sort(take)], list(feature_names), X.mean(axis=0), X.std(axis=0),
                   np.quantile(X, [0.25, 0.5, 0.75], axis=0))

    @classmethod
    def single(cls, row, feature_names) -> "BackgroundSet":
        row = np.atleast_2d(np.asarray(row, dtype=float))
        m = row.shape[1]
        return cls(row, list(feature_names), row[0].copy(), np.zeros(m), np.repeat(row, 3, axis=0))

    def select(self, names) -> "BackgroundSet":
        """Restrict to a subset of columns, in the given order."""
        idx = [self.feature_names.index(n) for n in names]
        return BackgroundSet(self.rows[:, idx], list(names), self.mean[idx], self.std[idx],
                             self.quantiles[:, idx])
