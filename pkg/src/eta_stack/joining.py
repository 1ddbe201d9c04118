"""Joint explanations of a stacked ensemble from its level-1 and level-2 explanations.

JM1 keeps one weighted row per level-1 model, JM2 sums those rows, JM3
first pushes the level-2 weights apart before summing. BL explains the
whole ensemble as a single function of the base features.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .explain import BackgroundSet, Explanation, kernel_shap, lime_explain
from .ingest import FeatureSchema

GUARD_TOL = 1e-6
SHRINK_MODES = ("subtractive", "multiplicative")
REDISTRIBUTE_MODES = ("proportional", "equal")


class JoiningError(ValueError):
    pass


@dataclass
class LevelTwoWeights:
    w: np.ndarray
    raw: np.ndarray
    divisor: float
    guard_applied: bool
    models: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"w": self.w.tolist(), "raw": self.raw.tolist(), "divisor": self.divisor,
                "guard_applied": self.guard_applied, "models": list(self.models)}


def normalize_level2(e_l2, models=None) -> LevelTwoWeights:
    """Scale level-2 attributions to sum to one.

    Falls back to the absolute sum when the signed sum nearly cancels,
    i.e. ``|sum e| < 1e-6 * sum |e|``.
    """
    if isinstance(e_l2, Explanation):
        models = e_l2.feature_names if models is None else models
        e_l2 = e_l2.attributions
    e = np.asarray(e_l2, dtype=float).ravel()
    if e.size == 0 or not np.any(e):
        raise JoiningError("uninformative second-level explanation")
    s, a = float(e.sum()), float(np.abs(e).sum())
    guard = abs(s) < GUARD_TOL * a
    divisor = a if guard else s
    return LevelTwoWeights(e / divisor, e.copy(), divisor, guard, list(models or []))


@dataclass
class JoinedExplanation:
    """``attributions`` is n x m for JM1 and a length-m vector otherwise."""

    method: str
    attributions: np.ndarray
    feature_names: list[str]
    sample_id: Optional[int] = None
    models: list[str] = field(default_factory=list)
    weights: Optional[list[float]] = None
    extra: dict = field(default_factory=dict)

    def __getitem__(self, name: str):
        return self.attributions[..., self.feature_names.index(name)]

    def to_dict(self) -> dict:
        d = {"method": self.method, "sample_id": self.sample_id, "feature_names": self.feature_names}
        if self.method == "JM1":
            d["rows"] = [{"model": mdl, "attributions": row.tolist()}
                         for mdl, row in zip(self.models, self.attributions)]
        else:
            d["attributions"] = self.attributions.tolist()
        if self.weights is not None:
            d["weights"] = list(self.weights)
        if self.extra:
            d["extra"] = self.extra
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "JoinedExplanation":
        if d["method"] == "JM1":
            A = np.array([r["attributions"] for r in d["rows"]], dtype=float)
            models = [r["model"] for r in d["rows"]]
        else:
            A, models = np.array(d["attributions"], dtype=float), []
        return cls(d["method"], A, d["feature_names"], d.get("sample_id"), models, d.get("weights"),
                   d.get("extra", {}))

    @classmethod
    def from_explanation(cls, e: Explanation, method: str = "BL") -> "JoinedExplanation":
        return cls(method, e.attributions.copy(), list(e.feature_names), e.sample_id,
                   extra={"base_value": e.base_value, "prediction": e.prediction})


def union_features(l1_explanations: list[Explanation], schema: FeatureSchema | None = None) -> list[str]:
    """Features covered by any level-1 explanation, in schema order when a schema is given."""
    seen = []
    for e in l1_explanations:
        for n in e.feature_names:
            if n not in seen:
                seen.append(n)
    if schema is not None:
        order = {n: i for i, n in enumerate(schema.names)}
        unknown = [n for n in seen if n not in order]
        if unknown:
            raise JoiningError(f"features not in the schema: {unknown}")
        seen.sort(key=order.__getitem__)
    return seen


def _check(l1_explanations, w: LevelTwoWeights, l1_names):
    if len(l1_explanations) != w.w.size:
        raise JoiningError(f"{len(l1_explanations)} level-1 explanations for {w.w.size} level-2 weights")
    names = l1_names or w.models
    if names:
        got = [e.model for e in l1_explanations]
        if any(g and g != n for g, n in zip(got, names)):
            raise JoiningError(f"level-1 explanation order {got} does not match the ensemble order {list(names)}")
    ids = {e.sample_id for e in l1_explanations}
    if len(ids) > 1:
        raise JoiningError(f"level-1 explanations are for different samples: {sorted(map(str, ids))}")


def _dense(l1_explanations, features) -> np.ndarray:
    E = np.zeros((len(l1_explanations), len(features)))
    col = {n: j for j, n in enumerate(features)}
    for i, e in enumerate(l1_explanations):
        for n, a in zip(e.feature_names, e.attributions):
            E[i, col[n]] = a
    return E


def join_jm1(l1_explanations, w: LevelTwoWeights, schema=None, l1_names=None) -> JoinedExplanation:
    _check(l1_explanations, w, l1_names)
    features = union_features(l1_explanations, schema)
    E = _dense(l1_explanations, features)
    models = list(l1_names or w.models or [e.model for e in l1_explanations])
    return JoinedExplanation("JM1", w.w[:, None] * E, features, l1_explanations[0].sample_id, models,
                             w.w.tolist())


def join_jm2(l1_explanations, w: LevelTwoWeights, schema=None, l1_names=None) -> JoinedExplanation:
    jm1 = join_jm1(l1_explanations, w, schema, l1_names)
    return JoinedExplanation("JM2", jm1.attributions.sum(axis=0), jm1.feature_names, jm1.sample_id,
                             jm1.models, jm1.weights)


def diversify(w, beta: float = 0.5, shrink: str = "subtractive", redistribute: str = "proportional"):
    """Shrink weights below the mean and hand the freed mass to those at or above it.

    Returns ``(w_new, fell_back)``; ``fell_back`` is True when no weight
    reaches the mean, in which case ``w`` is returned unchanged.
    """
    if beta < 0:
        raise JoiningError("beta must be non-negative")
    if shrink not in SHRINK_MODES:
        raise JoiningError(f"unknown shrink mode {shrink!r}")
    if redistribute not in REDISTRIBUTE_MODES:
        raise JoiningError(f"unknown redistribution mode {redistribute!r}")
    w = np.asarray(w, dtype=float).copy()
    alpha = w.mean()
    # the computed mean of equal weights can exceed each of them by rounding
    tol = 1e-12 * max(1.0, float(np.abs(w).max())) if w.size else 0.0
    low, high = w < alpha - tol, w >= alpha - tol
    if not high.any():
        return w, True
    if shrink == "subtractive":
        d = np.where(low, np.minimum(beta, np.maximum(w, 0.0)), 0.0)
    else:
        d = np.where(low, np.clip(beta, 0.0, 1.0) * np.maximum(w, 0.0), 0.0)
    pool = d.sum()
    out = w - d
    if pool > 0:
        if redistribute == "proportional" and np.abs(w[high]).sum() > 0:
            share = np.abs(w[high]) / np.abs(w[high]).sum()
        else:
            share = np.full(high.sum(), 1.0 / high.sum())
        out[high] += pool * share
    return out, False


def join_jm3(l1_explanations, w: LevelTwoWeights, beta: float = 0.5, shrink: str = "subtractive",
             redistribute: str = "proportional", schema=None, l1_names=None) -> JoinedExplanation:
    w_new, fell_back = diversify(w.w, beta, shrink, redistribute)
    if fell_back:
        warnings.warn("no level-2 weight reaches the mean; JM3 reduces to JM2", RuntimeWarning, stacklevel=2)
    div = LevelTwoWeights(w_new, w.raw, w.divisor, w.guard_applied, w.models)
    jm2 = join_jm2(l1_explanations, div, schema, l1_names)
    return JoinedExplanation("JM3", jm2.attributions, jm2.feature_names, jm2.sample_id, jm2.models,
                             w_new.tolist(),
                             {"beta": beta, "shrink": shrink, "redistribute": redistribute,
                              "input_weights": w.w.tolist(), "fell_back": fell_back})


def baseline_features(schema: FeatureSchema) -> list[str]:
    """Schema features minus those the wrapper regenerates, in schema order."""
    out = []
    for f in schema.features:
        if f.regenerable:
            if not f.ancestors or any(a not in schema.names for a in f.ancestors):
                raise JoiningError(f"lineage missing for derived feature {f.name!r}")
            continue
        out.append(f.name)
    return out


def baseline_function(ensemble, schema: FeatureSchema | None = None):
    """``(g, names)``: the whole ensemble as a function of the baseline features."""
    schema = schema or ensemble.schema
    names = baseline_features(schema)

    def g(Z):
        return ensemble.predict(schema.regenerate(Z, names))[0]

    return g, names


def baseline_explain(ensemble, x, method: str, background: BackgroundSet, *, seed: int = 0,
                     lime_samples: int = 5000, kernel_width=None, shap_coalitions: int = 2048,
                     sample_id=None) -> Explanation:
    """Explain the wrapped ensemble at schema row ``x``.

    ``background`` may be over the full schema or already over the
    baseline features.
    """
    g, names = baseline_function(ensemble)
    x = np.asarray(x, dtype=float).ravel()
    full = ensemble.schema.names
    if x.size == len(full):
        x = x[ensemble.schema.indices(names)]
    if background.feature_names != names:
        background = background.select(names)
    model = f"BL/{ensemble.name}"
    if method == "lime":
        return lime_explain(g, x, background, lime_samples, kernel_width, seed, sample_id=sample_id, model=model)
    if method == "shap":
        return kernel_shap(g, x, background, shap_coalitions, seed, sample_id=sample_id, model=model)
    raise JoiningError(f"unknown explanation method {method!r}")


JOINED_HEADER = ["sample_id", "method", "model", "feature", "value"]


def joined_long_csv(joined: list[JoinedExplanation], extra: dict | None = None) -> str:
    """Long-format rows keyed by sample, method, model (JM1 only) and feature."""
    extra = extra or {}
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(JOINED_HEADER + list(extra))
    for j in joined:
        if j.method == "JM1":
            for mdl, row in zip(j.models, j.attributions):
                for n, a in zip(j.feature_names, row):
                    wr.writerow([j.sample_id, j.method, mdl, n, repr(float(a)), *extra.values()])
        else:
            for n, a in zip(j.feature_names, j.attributions):
                wr.writerow([j.sample_id, j.method, "", n, repr(float(a)), *extra.values()])
    return buf.getvalue()
