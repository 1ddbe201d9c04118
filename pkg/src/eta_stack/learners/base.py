"""Regressor specs, the trained-model interface and model documents."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

FAMILIES = ("random_forest", "gradient_boosting", "feedforward_net", "linear")
MODEL_DOC_VERSION = 1


class LearnerError(Exception):
    pass


class SchemaMismatchError(LearnerError):
    pass


# Level-1 hyperparameters; level-2 variants shrink capacity (see L2_DEFAULTS).
DEFAULTS: dict[str, dict[str, Any]] = {
    "random_forest": {
        "n_trees": 300, "max_depth": 89, "min_samples_leaf": 4, "min_samples_split": 4,
        "max_features": "auto", "bootstrap": True, "max_bins": 255,
    },
    "gradient_boosting": {
        "n_trees": 300, "max_depth": 11, "learning_rate": 0.3, "min_child_weight": 7.0,
        "subsample": 1.0, "gamma": 0.0, "colsample_bytree": 1.0, "reg_lambda": 1.0, "max_bins": 255,
    },
    "feedforward_net": {
        "hidden": [300, 150, 50, 25], "batch_size": 128, "learning_rate": 0.001, "epochs": 25,
        "beta1": 0.9, "beta2": 0.999, "eps": 1e-8, "standardize_target": True,
    },
    "linear": {"cond_limit": 1e10, "ridge": 1e-8},
}

L2_DEFAULTS = {
    "random_forest": {"n_trees": 100},
    "gradient_boosting": {"n_trees": 100},
    "feedforward_net": {"hidden": [50, 25]},
    "linear": {},
}


@dataclass(frozen=True)
class RegressorSpec:
    """What to train: a family, its hyperparameters and the input columns.

    ``mask`` lists the feature names the model consumes; ``None`` means
    every column of the data it is fitted on.
    """

    family: str
    params: dict = field(default_factory=dict)
    mask: Optional[tuple[str, ...]] = None
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        unknown = set(self.params) - set(DEFAULTS[self.family])
        if unknown:
            raise ValueError(f"{self.family}: unknown hyperparameters {sorted(unknown)}")
        if self.mask is not None:
            if len(self.mask) == 0:
                raise ValueError("feature mask must be non-empty")
            object.__setattr__(self, "mask", tuple(self.mask))
        if not self.name:
            object.__setattr__(self, "name", self.family)
        _validate(self.family, self.hyper)

    @property
    def hyper(self) -> dict:
        h = copy.deepcopy(DEFAULTS[self.family])
        h.update(self.params)
        return h

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params),
                "mask": list(self.mask) if self.mask is not None else None,
                "seed": self.seed, "name": self.name}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressorSpec":
        mask = d.get("mask")
        return cls(d["family"], dict(d.get("params", {})), tuple(mask) if mask else None,
                   int(d.get("seed", 0)), d.get("name", ""))


def _validate(family: str, h: dict) -> None:
    def need(cond, msg):
        if not cond:
            raise ValueError(f"{family}: {msg}")

    if family in ("random_forest", "gradient_boosting"):
        need(int(h["n_trees"]) >= 0, "n_trees must be >= 0")
        need(h["max_depth"] is None or int(h["max_depth"]) >= 1, "max_depth must be >= 1 or None")
        need(2 <= int(h["max_bins"]) <= 256, "max_bins must be in [2, 256]")
    if family == "random_forest":
        need(int(h["n_trees"]) >= 1, "n_trees must be >= 1")
        need(int(h["min_samples_leaf"]) >= 1, "min_samples_leaf must be >= 1")
        need(int(h["min_samples_split"]) >= 2, "min_samples_split must be >= 2")
        mf = h["max_features"]
        need(mf in ("auto", "all") or (isinstance(mf, (int, float)) and mf > 0), "bad max_features")
    elif family == "gradient_boosting":
        need(0.0 < float(h["learning_rate"]) <= 1.0, "learning_rate must be in (0, 1]")
        need(float(h["min_child_weight"]) >= 0, "min_child_weight must be >= 0")
        need(0.0 < float(h["subsample"]) <= 1.0, "subsample must be in (0, 1]")
        need(0.0 < float(h["colsample_bytree"]) <= 1.0, "colsample_bytree must be in (0, 1]")
        need(float(h["gamma"]) >= 0 and float(h["reg_lambda"]) >= 0, "gamma and reg_lambda must be >= 0")
    elif family == "feedforward_net":
        need(all(int(s) >= 1 for s in h["hidden"]), "layer sizes must be >= 1")
        need(int(h["batch_size"]) >= 1 and int(h["epochs"]) >= 1, "batch_size and epochs must be >= 1")
        need(float(h["learning_rate"]) > 0, "learning_rate must be > 0")
    elif family == "linear":
        need(float(h["cond_limit"]) > 1 and float(h["ridge"]) > 0, "bad linear settings")


def max_features_for(setting, m: int) -> int:
    """Features tried per node: ``"auto"`` is ceil(m/3), floats are fractions of m."""
    if setting == "auto":
        return max(1, math.ceil(m / 3))
    if setting == "all":
        return m
    if isinstance(setting, float) and setting <= 1.0:
        return max(1, math.ceil(setting * m))
    return min(m, int(setting))


@dataclass
class Frame:
    """Training matrix with named columns (a Dataset, or level-2 inputs)."""

    X: np.ndarray
    y: np.ndarray
    names: list[str]

    @classmethod
    def of(cls, data) -> "Frame":
        if isinstance(data, Frame):
            return data
        if hasattr(data, "schema"):
            return cls(data.X, data.y, list(data.schema.names))
        X, y, names = data
        return cls(np.asarray(X, dtype=float), np.asarray(y, dtype=float), list(names))


class TrainedRegressor:
    """A fitted model. Immutable after fitting; ``predict`` is deterministic.

    ``input_names`` is the column layout the model was fitted against and
    ``features`` the masked subset it actually reads.
    """

    family: str = ""

    def __init__(self, spec: RegressorSpec, input_names, meta=None):
        self.spec = spec
        self.input_names = list(input_names)
        mask = list(spec.mask) if spec.mask is not None else list(self.input_names)
        missing = [n for n in mask if n not in self.input_names]
        if missing:
            raise LearnerError(f"{spec.name}: mask columns not in the data: {missing}")
        self.features = mask
        self._cols = np.array([self.input_names.index(n) for n in mask], dtype=np.int64)
        self.meta = dict(meta or {})

    @property
    def name(self) -> str:
        return self.spec.name

    def predict(self, X, names=None) -> np.ndarray:
        """Predict for rows of ``X``.

        Without ``names`` the columns must follow ``input_names``; with
        ``names`` the masked columns are looked up by name.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if names is None:
            if X.shape[1] != len(self.input_names):
                raise LearnerError(f"{self.name}: expected {len(self.input_names)} columns, got {X.shape[1]}")
            Z = X[:, self._cols]
        else:
            names = list(names)
            missing = [n for n in self.features if n not in names]
            if missing:
                raise LearnerError(f"{self.name}: missing masked columns {missing}")
            Z = X[:, [names.index(n) for n in self.features]]
        return self.predict_features(Z)

    def predict_features(self, Z) -> np.ndarray:
        """Predict from a matrix holding exactly the masked columns, in mask order."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if Z.shape[1] != len(self.features):
            raise LearnerError(f"{self.name}: expected {len(self.features)} masked columns")
        return self._predict(Z)

    def _predict(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _params_doc(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "version": MODEL_DOC_VERSION,
            "family": self.family,
            "spec": self.spec.to_dict(),
            "input_names": self.input_names,
            "features": self.features,
            "meta": self.meta,
            "params": self._params_doc(),
        }


def check_finite_xy(name, X, y):
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise LearnerError(f"{name}: training data holds non-finite values")
