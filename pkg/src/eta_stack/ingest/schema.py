"""Feature schema: canonical column order plus base-to-derived lineage."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .calendar import time_features
from .geo import NYC_BOX, BoundingBox, grid_cells, haversine
from .records import trips_to_columns, TripRecord


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str  # "base" | "derived"
    ancestors: tuple[str, ...] = ()
    # derived features that are only an alternative encoding of their
    # ancestors; the whole-ensemble wrapper recomputes these internally
    regenerable: bool = False

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "ancestors": list(self.ancestors),
                "regenerable": self.regenerable}


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureSpec, ...]
    box: BoundingBox = NYC_BOX
    cell_size: float = 50.0
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        for f in self.features:
            if f.kind not in ("base", "derived"):
                raise ValueError(f"{f.name}: kind must be base or derived")
            if f.kind == "derived" and not f.ancestors:
                raise ValueError(f"derived feature {f.name} lists no base ancestor")
            for a in f.ancestors:
                if a not in names:
                    raise ValueError(f"{f.name}: unknown ancestor {a}")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def __len__(self):
        return len(self.features)

    def index(self, name: str) -> int:
        return self._index[name]

    def indices(self, names) -> list[int]:
        missing = [n for n in names if n not in self._index]
        if missing:
            raise KeyError(f"features not in schema: {missing}")
        return [self._index[n] for n in names]

    def spec(self, name: str) -> FeatureSpec:
        return self.features[self._index[name]]

    @property
    def origin(self) -> tuple[float, float]:
        return self.box.origin

    def regenerable_names(self) -> list[str]:
        return [f.name for f in self.features if f.regenerable]

    def to_dict(self) -> dict:
        return {
            "features": [f.to_dict() for f in self.features],
            "box": self.box.to_list(),
            "cell_size": self.cell_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        feats = tuple(FeatureSpec(f["name"], f["kind"], tuple(f["ancestors"]), f.get("regenerable", False))
                      for f in d["features"])
        return cls(feats, BoundingBox(*d["box"]), float(d["cell_size"]))

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def regenerate(self, X_partial: np.ndarray, partial_names: list[str]) -> np.ndarray:
        """Build a full schema matrix from one lacking regenerable features.

        Grid indices are recomputed from their coordinate ancestors without
        the bounding-box check, since perturbed inputs may leave the box.
        """
        X_partial = np.atleast_2d(np.asarray(X_partial, dtype=float))
        pos = {n: i for i, n in enumerate(partial_names)}
        out = np.empty((X_partial.shape[0], len(self)), dtype=float)
        for j, f in enumerate(self.features):
            if f.name in pos:
                out[:, j] = X_partial[:, pos[f.name]]
            elif f.regenerable:
                continue
            else:
                raise KeyError(f"feature {f.name} is neither given nor regenerable")
        for j, f in enumerate(self.features):
            if f.name in pos:
                continue
            lat_name, lon_name = f.ancestors
            lat_a = out[:, self.index(lat_name)]
            lon_a = out[:, self.index(lon_name)]
            gx, gy = grid_cells(lat_a, lon_a, self.origin, self.cell_size)
            out[:, j] = gx if f.name.endswith("_x") else gy
        return out


def default_schema(box: BoundingBox = NYC_BOX, cell_size: float = 50.0) -> FeatureSchema:
    """The 14-feature layout: coordinates, grid cells, calendar, temperature, distance."""
    coords = ("pickup_lat", "pickup_lon", "dropoff_lat", "dropoff_lon")
    feats = [FeatureSpec(n, "base") for n in coords]
    for end in ("pickup", "dropoff"):
        for axis in ("x", "y"):
            feats.append(FeatureSpec(f"{end}_grid_{axis}", "derived",
                                     (f"{end}_lat", f"{end}_lon"), regenerable=True))
    feats += [FeatureSpec(n, "base") for n in ("month", "week", "weekday", "time_bin", "temperature")]
    feats.append(FeatureSpec("distance", "derived", coords, regenerable=False))
    return FeatureSchema(tuple(feats), box, cell_size)


def engineer_features(trips: list[TripRecord], schema: FeatureSchema) -> np.ndarray:
    """Feature matrix whose column j is ``schema.features[j]``."""
    cols = trips_to_columns(trips)
    if np.any(np.isnan(cols["temperature"])):
        raise ValueError("every trip needs a temperature before feature engineering")
    month, week, weekday, tbin = time_features(cols["pickup_time"])
    pgx, pgy = grid_cells(cols["pickup_lat"], cols["pickup_lon"], schema.origin, schema.cell_size)
    dgx, dgy = grid_cells(cols["dropoff_lat"], cols["dropoff_lon"], schema.origin, schema.cell_size)
    values = {
        "pickup_lat": cols["pickup_lat"], "pickup_lon": cols["pickup_lon"],
        "dropoff_lat": cols["dropoff_lat"], "dropoff_lon": cols["dropoff_lon"],
        "pickup_grid_x": pgx, "pickup_grid_y": pgy, "dropoff_grid_x": dgx, "dropoff_grid_y": dgy,
        "month": month, "week": week, "weekday": weekday, "time_bin": tbin,
        "temperature": cols["temperature"],
        "distance": haversine(cols["pickup_lat"], cols["pickup_lon"], cols["dropoff_lat"], cols["dropoff_lon"]),
    }
    X = np.empty((len(trips), len(schema)), dtype=float)
    for j, name in enumerate(schema.names):
        X[:, j] = values[name]
    return X
