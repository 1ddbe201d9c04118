"""Regressor families behind one fit/predict interface."""

from __future__ import annotations

from .base import (
    DEFAULTS,
    FAMILIES,
    MODEL_DOC_VERSION,
    L2_DEFAULTS,
    Frame,
    LearnerError,
    RegressorSpec,
    SchemaMismatchError,
    TrainedRegressor,
    max_features_for,
)
from .boosting import GradientBoostingModel, fit_gradient_boosting
from .forest import RandomForestModel, fit_random_forest
from .linear import LinearModel, fit_mlr
from .mlp import DivergenceError, MLPModel, best_epoch, fit_mlp

_MODEL_CLASSES = {
    "random_forest": RandomForestModel,
    "gradient_boosting": GradientBoostingModel,
    "feedforward_net": MLPModel,
    "linear": LinearModel,
}


def fit(spec: RegressorSpec, train, validation=None) -> TrainedRegressor:
    """Fit any family; the network additionally needs ``validation``."""
    if spec.family == "random_forest":
        return fit_random_forest(train, spec)
    if spec.family == "gradient_boosting":
        return fit_gradient_boosting(train, spec)
    if spec.family == "feedforward_net":
        if validation is None:
            raise LearnerError(f"{spec.name}: feedforward_net needs a validation set")
        return fit_mlp(train, validation, spec)
    return fit_mlr(train, spec)


def predict(model: TrainedRegressor, X, names=None):
    return model.predict(X, names)


def model_from_dict(doc: dict) -> TrainedRegressor:
    if doc.get("version") != MODEL_DOC_VERSION:
        raise LearnerError(f"unsupported model document version {doc.get('version')!r}")
    cls = _MODEL_CLASSES[doc["family"]]
    spec = RegressorSpec.from_dict(doc["spec"])
    return cls.from_params(spec, doc["input_names"], doc["params"], doc.get("meta", {}))
