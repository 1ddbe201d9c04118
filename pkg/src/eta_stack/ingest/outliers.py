"""Outlier removal: study area, duration, distance and implied speed."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geo import NYC_BOX, BoundingBox, haversine
from .records import TripRecord, trips_to_columns

# Order matters only for the order of reasons listed per reject.
CRITERIA = (
    "pickup outside study area",
    "dropoff outside study area",
    "duration out of bounds",
    "zero distance",
    "speed out of bounds",
)


@dataclass(frozen=True)
class OutlierCriteria:
    """Thresholds for trip filtering.

    The defaults are artifact choices; any bound can be overridden.
    ``min_distance_m`` is exclusive, so the default drops zero-distance trips.
    """

    box: BoundingBox = NYC_BOX
    min_duration_s: float = 60.0
    max_duration_s: float = 7200.0
    min_speed_kmh: float = 0.5
    max_speed_kmh: float = 110.0
    min_distance_m: float = 0.0

    def __post_init__(self):
        if not self.min_duration_s < self.max_duration_s:
            raise ValueError("min_duration_s must be below max_duration_s")
        if not self.min_speed_kmh < self.max_speed_kmh:
            raise ValueError("min_speed_kmh must be below max_speed_kmh")
        if self.min_distance_m < 0:
            raise ValueError("min_distance_m must be >= 0")

    def to_dict(self) -> dict:
        return {
            "box": self.box.to_list(),
            "min_duration_s": self.min_duration_s,
            "max_duration_s": self.max_duration_s,
            "min_speed_kmh": self.min_speed_kmh,
            "max_speed_kmh": self.max_speed_kmh,
            "min_distance_m": self.min_distance_m,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OutlierCriteria":
        d = dict(d)
        if "box" in d:
            d["box"] = BoundingBox(*d["box"])
        return cls(**d)


@dataclass
class FilterReport:
    n_in: int
    n_kept: int
    counts: dict[str, int]
    rejects: list[tuple[int, list[str]]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_in": self.n_in,
            "n_kept": self.n_kept,
            "counts": dict(self.counts),
            "rejects": [{"trip_id": int(t), "reasons": r} for t, r in self.rejects],
        }


def violations(cols: dict[str, np.ndarray], criteria: OutlierCriteria) -> dict[str, np.ndarray]:
    """Boolean violation mask per criterion over columnar trips."""
    dist = haversine(cols["pickup_lat"], cols["pickup_lon"], cols["dropoff_lat"], cols["dropoff_lon"])
    dur = cols["duration"]
    with np.errstate(divide="ignore", invalid="ignore"):
        speed = np.where(dur > 0, dist / np.where(dur > 0, dur, 1.0) * 3.6, np.inf)
    return {
        "pickup outside study area": ~criteria.box.contains(cols["pickup_lat"], cols["pickup_lon"]),
        "dropoff outside study area": ~criteria.box.contains(cols["dropoff_lat"], cols["dropoff_lon"]),
        "duration out of bounds": (dur < criteria.min_duration_s) | (dur > criteria.max_duration_s),
        "zero distance": dist <= criteria.min_distance_m,
        # speed is only judged once the distance test passes, so a zero-distance trip has one reason
        "speed out of bounds": (dist > criteria.min_distance_m)
                               & ((speed < criteria.min_speed_kmh) | (speed > criteria.max_speed_kmh)),
    }


def filter_outliers(trips: list[TripRecord], criteria: OutlierCriteria = OutlierCriteria()
                    ) -> tuple[list[TripRecord], FilterReport]:
    """Keep trips satisfying every criterion; report all violations of the rest."""
    if any(t.temperature is None for t in trips):
        raise ValueError("attach temperatures before filtering")
    if not trips:
        return [], FilterReport(0, 0, {c: 0 for c in CRITERIA})
    viol = violations(trips_to_columns(trips), criteria)
    bad = np.zeros(len(trips), dtype=bool)
    for m in viol.values():
        bad |= m
    kept, rejects = [], []
    for i, tr in enumerate(trips):
        if bad[i]:
            rejects.append((tr.trip_id, [c for c in CRITERIA if viol[c][i]]))
        else:
            kept.append(tr)
    counts = {c: int(viol[c].sum()) for c in CRITERIA}
    return kept, FilterReport(len(trips), len(kept), counts, rejects)
