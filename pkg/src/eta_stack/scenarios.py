"""Paired trip cohorts (SC1-SC4) and how well explanations separate them."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .explain import Explanation
from .ingest import BoundingBox, Dataset

SIDES = ("lower", "higher")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Predicate:
    """One cohort rule.

    kind ``box`` tests (lat_feature, lon_feature) against a closed
    rectangle; ``range`` tests ``feature`` against [lo, hi) on the raw
    value; ``quantile`` resolves its bounds from quantiles of ``feature``
    on the population, with ``closed`` saying which ends are inclusive.
    """

    kind: str
    feature: str
    lo: float = -np.inf
    hi: float = np.inf
    closed: str = "left"  # left | right | both
    box: Optional[BoundingBox] = None
    lon_feature: str = ""

    def bounds(self, population: Dataset) -> tuple[float, float]:
        if self.kind != "quantile":
            return self.lo, self.hi
        col = population.column(self.feature)
        return tuple(float(q) for q in np.quantile(col, [self.lo, self.hi], method="linear"))

    def mask(self, ds: Dataset, population: Dataset | None = None) -> np.ndarray:
        if self.kind == "box":
            return self.box.contains(ds.column(self.feature), ds.column(self.lon_feature))
        lo, hi = self.bounds(population if population is not None else ds)
        v = ds.column(self.feature)
        left = v >= lo if self.closed in ("left", "both") else v > lo
        right = v <= hi if self.closed in ("right", "both") else v < hi
        return left & right

    def describe(self) -> dict:
        d = {"kind": self.kind, "feature": self.feature}
        if self.kind == "box":
            d.update(lon_feature=self.lon_feature, box=self.box.to_list())
        else:
            d.update(lo=self.lo, hi=self.hi, closed=self.closed)
        return d


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    lower: Predicate
    higher: Predicate
    features_of_interest: tuple[str, ...]
    n_per_side: int = 10
    seed: int = 0
    ordered: bool = True

    def __post_init__(self):
        if self.n_per_side < 1:
            raise ScenarioError("samples per characteristic must be at least 1")

    def with_(self, **kw) -> "ScenarioSpec":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {"id": self.id, "lower": self.lower.describe(), "higher": self.higher.describe(),
                "features_of_interest": list(self.features_of_interest), "n_per_side": self.n_per_side,
                "seed": self.seed, "ordered": self.ordered}


SC1_LOWER_BOX = BoundingBox(40.7975, -73.9619, 40.8186, -73.9356)
SC1_HIGHER_BOX = BoundingBox(40.7361, -73.9980, 40.7644, -73.9770)


def builtin_scenarios(n_per_side: int = 10, seed: int = 0) -> dict[str, ScenarioSpec]:
    # SC1 is a location contrast with no natural order between the two districts
    sc1 = ScenarioSpec("SC1", Predicate("box", "pickup_lat", box=SC1_LOWER_BOX, lon_feature="pickup_lon"),
                       Predicate("box", "pickup_lat", box=SC1_HIGHER_BOX, lon_feature="pickup_lon"),
                       ("pickup_lat", "pickup_lon"), n_per_side, seed, ordered=False)
    sc2 = ScenarioSpec("SC2", Predicate("range", "time_bin", 36, 60), Predicate("range", "time_bin", 192, 216),
                       ("time_bin",), n_per_side, seed)
    sc3 = ScenarioSpec("SC3", Predicate("quantile", "temperature", 0.10, 0.25, "right"),
                       Predicate("quantile", "temperature", 0.75, 0.90, "left"),
                       ("temperature",), n_per_side, seed)
    sc4 = ScenarioSpec("SC4", Predicate("quantile", "distance", 0.10, 0.25, "right"),
                       Predicate("quantile", "distance", 0.75, 0.90, "left"),
                       ("distance",), n_per_side, seed)
    return {s.id: s for s in (sc1, sc2, sc3, sc4)}


@dataclass
class ScenarioSamples:
    spec: ScenarioSpec
    lower: np.ndarray   # row indices into the population
    higher: np.ndarray
    bounds: dict

    def side(self, name: str) -> np.ndarray:
        return self.lower if name == "lower" else self.higher


def select_scenario_samples(test: Dataset, spec: ScenarioSpec) -> ScenarioSamples:
    """Seeded draw without replacement from each cohort's qualifying rows."""
    rng = np.random.default_rng(spec.seed)
    picked, bounds = {}, {}
    masks = {s: getattr(spec, s).mask(test, test) for s in SIDES}
    if np.any(masks["lower"] & masks["higher"]):
        raise ScenarioError(f"{spec.id}: the cohorts overlap")
    for side in SIDES:
        rows = np.flatnonzero(masks[side])
        if rows.size < spec.n_per_side:
            raise ScenarioError(f"{spec.id} {side}: {rows.size} qualifying rows, {spec.n_per_side} requested")
        picked[side] = np.sort(rng.choice(rows, size=spec.n_per_side, replace=False))
        pred = getattr(spec, side)
        if pred.kind != "box":
            bounds[side] = list(pred.bounds(test))
    return ScenarioSamples(spec, picked["lower"], picked["higher"], bounds)


def samples_csv(test: Dataset, samples: ScenarioSamples, extra: dict | None = None) -> str:
    extra = extra or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "trip_id", "characteristic", *test.schema.names, "duration", *extra])
    for side in SIDES:
        for r in samples.side(side):
            w.writerow([samples.spec.id, test.ids[r], side, *(repr(float(v)) for v in test.X[r]),
                        repr(float(test.y[r])), *extra.values()])
    return buf.getvalue()


@dataclass
class FeatureStats:
    mean: float
    median: float
    q25: float
    q75: float
    std: float
    n: int

    @classmethod
    def of(cls, v) -> "FeatureStats":
        v = np.asarray(v, dtype=float)
        q25, med, q75 = np.quantile(v, [0.25, 0.5, 0.75])
        return cls(float(v.mean()), float(med), float(q25), float(q75), float(v.std()), int(v.size))


@dataclass
class SeparationReport:
    scenario: str
    model: str
    method: str
    feature_names: list[str]
    stats: dict   # side -> feature -> FeatureStats
    margins: dict  # feature of interest -> mean_higher - mean_lower
    ordered: bool
    sign_correct: Optional[bool] = None
    extra: dict = field(default_factory=dict)

    def margin(self, feature: str | None = None) -> float:
        return self.margins[feature or next(iter(self.margins))]


def _attribution_matrix(explanations) -> tuple[np.ndarray, list[str]]:
    names = list(explanations[0].feature_names)
    rows = []
    for e in explanations:
        if list(e.feature_names) != names:
            raise ScenarioError("explanations must share one feature list")
        a = np.asarray(e.attributions, dtype=float)
        if a.ndim != 1:
            raise ScenarioError("separation is defined on single attribution vectors; sum JM1 rows first")
        rows.append(a)
    return np.vstack(rows), names


def scenario_separation_report(explanations_lower, explanations_higher, spec: ScenarioSpec,
                               model: str = "", method: str = "") -> SeparationReport:
    if not explanations_lower or not explanations_higher:
        raise ScenarioError("both characteristics need at least one explanation")
    lo, names = _attribution_matrix(explanations_lower)
    hi, names_hi = _attribution_matrix(explanations_higher)
    if names != names_hi:
        raise ScenarioError("the two characteristics were explained over different features")
    missing = [f for f in spec.features_of_interest if f not in names]
    if missing:
        raise ScenarioError(f"{spec.id}: features of interest {missing} absent from the explanations")
    stats = {side: {n: FeatureStats.of(M[:, j]) for j, n in enumerate(names)}
             for side, M in (("lower", lo), ("higher", hi))}
    margins = {f: stats["higher"][f].mean - stats["lower"][f].mean for f in spec.features_of_interest}
    sign = all(m > 0 for m in margins.values()) if spec.ordered else None
    return SeparationReport(spec.id, model, method, names, stats, margins, spec.ordered, sign)


REPORT_HEADER = ["scenario", "model", "method", "feature", "characteristic", "mean", "median", "q25", "q75",
                 "std", "n", "margin", "sign_correct"]


def separation_csv(reports: list[SeparationReport], extra: dict | None = None) -> str:
    extra = extra or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER + list(extra))
    for r in reports:
        for n in r.feature_names:
            for side in SIDES:
                s = r.stats[side][n]
                margin = repr(r.margins[n]) if n in r.margins else ""
                sign = "" if n not in r.margins or r.sign_correct is None else str(r.sign_correct).lower()
                w.writerow([r.scenario, r.model, r.method, n, side, repr(s.mean), repr(s.median), repr(s.q25),
                            repr(s.q75), repr(s.std), s.n, margin, sign, *extra.values()])
    return buf.getvalue()
