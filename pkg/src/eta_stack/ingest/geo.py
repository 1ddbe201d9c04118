"""Great-circle distance and the square-grid location encoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_M = 6_371_000.0


def haversine(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters between two points given in degrees.

    Works element-wise on arrays; returns a float for scalar input.
    """
    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(np.asarray(lon2, dtype=float) - np.asarray(lon1, dtype=float))
    a = np.sin(dphi * 0.5) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb * 0.5) ** 2
    d = 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
    if np.ndim(d) == 0:
        return float(d)
    return d


@dataclass(frozen=True)
class BoundingBox:
    lat_min: float
    lon_min: float
    lat_max: float
    lon_max: float

    def __post_init__(self):
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValueError(f"degenerate bounding box {self}")
        if not (-90 <= self.lat_min and self.lat_max <= 90):
            raise ValueError("latitude bounds outside [-90, 90]")
        if not (-180 <= self.lon_min and self.lon_max <= 180):
            raise ValueError("longitude bounds outside [-180, 180]")

    def contains(self, lat, lon):
        """Closed-edge membership test, element-wise."""
        lat = np.asarray(lat)
        lon = np.asarray(lon)
        return (lat >= self.lat_min) & (lat <= self.lat_max) & (lon >= self.lon_min) & (lon <= self.lon_max)

    @property
    def origin(self) -> tuple[float, float]:
        return (self.lat_min, self.lon_min)

    def to_list(self) -> list[float]:
        return [self.lat_min, self.lon_min, self.lat_max, self.lon_max]


# New York City study area (five boroughs plus JFK/LGA)
NYC_BOX = BoundingBox(40.49, -74.27, 40.92, -73.68)


def meter_offsets(lat, lon, origin: tuple[float, float]):
    """East/north offsets from ``origin`` via an equirectangular projection at the origin latitude."""
    lat0, lon0 = origin
    k = np.pi / 180.0 * EARTH_RADIUS_M
    east = (np.asarray(lon, dtype=float) - lon0) * k * np.cos(np.radians(lat0))
    north = (np.asarray(lat, dtype=float) - lat0) * k
    return east, north


def grid_cells(lat, lon, origin: tuple[float, float], cell_size: float = 50.0):
    """Unchecked vectorised grid indices (may be negative outside the box)."""
    east, north = meter_offsets(lat, lon, origin)
    return np.floor(east / cell_size), np.floor(north / cell_size)


def grid_index(lat, lon, origin: tuple[float, float], cell_size: float = 50.0,
               box: BoundingBox | None = None):
    """Indices ``(ix, iy)`` of the ``cell_size`` square grid cell containing the point.

    Raises ``ValueError`` for points west/south of the origin or outside ``box``.
    """
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    if box is not None and not np.all(box.contains(lat, lon)):
        raise ValueError("point outside the study bounding box")
    ix, iy = grid_cells(lat, lon, origin, cell_size)
    if np.any(ix < 0) or np.any(iy < 0):
        raise ValueError("point lies west or south of the grid origin")
    if np.ndim(ix) == 0:
        return int(ix), int(iy)
    return ix.astype(np.int64), iy.astype(np.int64)
