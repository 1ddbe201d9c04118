"""Synthetic taxi trips with a known duration mechanism.

duration = base + c1 * distance * congestion(hour) + c2 * zone(pickup)
           + c_temp * temperature + noise

Congestion has a morning and a larger, broad evening peak with its
minimum before dawn. ``zone`` is a bump centred on midtown, so pickups in
the midtown SC1 rectangle take longer than those in the uptown one.
Temperature enters with a near-zero coefficient.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from datetime import datetime

import numpy as np

from .ingest import NYC_BOX, TripRecord, WeatherSeries, haversine, to_timestamp
from .scenarios import SC1_HIGHER_BOX, SC1_LOWER_BOX


@dataclass(frozen=True)
class SyntheticConfig:
    n_trips: int = 5000
    seed: int = 0
    base_s: float = 120.0
    c1_s_per_m: float = 0.12          # about 30 km/h at congestion 1
    c2_s: float = 300.0
    c_temp_s_per_c: float = 0.2
    noise_s: float = 45.0
    zone_center: tuple[float, float] = (40.754, -73.984)
    zone_radius_m: float = 2500.0
    morning_peak_h: float = 8.5
    morning_width_h: float = 1.2
    morning_height: float = 0.30
    evening_peak_h: float = 19.0
    evening_width_h: float = 3.0
    evening_height: float = 0.60
    congestion_floor: float = 0.75
    share_sc1_lower: float = 0.15
    share_sc1_higher: float = 0.15
    test_share: float = 0.2
    outlier_share: float = 0.0
    median_distance_m: float = 2500.0


# Hourly pickup shares, kept away from zero at night so SC2's 3-5 am cohort is populated.
HOUR_WEIGHTS = np.array([3.0, 2.6, 2.3, 2.2, 2.2, 2.4, 3.0, 4.2, 5.2, 5.0, 4.6, 4.6,
                         4.8, 4.8, 5.0, 5.2, 5.4, 5.6, 5.8, 5.6, 5.2, 4.8, 4.2, 3.6])

TRAIN_START = to_timestamp(datetime(2015, 1, 1))
TEST_START = to_timestamp(datetime(2016, 1, 1))
TEST_END = to_timestamp(datetime(2016, 4, 1))


def _bump(h, peak, width):
    d = np.abs(h - peak) % 24.0
    d = np.minimum(d, 24.0 - d)
    return np.exp(-0.5 * (d / width) ** 2)


def congestion(hour, cfg: SyntheticConfig = SyntheticConfig()):
    """Traffic multiplier as a function of fractional hour of day."""
    h = np.asarray(hour, dtype=float)
    return (cfg.congestion_floor + cfg.morning_height * _bump(h, cfg.morning_peak_h, cfg.morning_width_h)
            + cfg.evening_height * _bump(h, cfg.evening_peak_h, cfg.evening_width_h))


def zone(lat, lon, cfg: SyntheticConfig = SyntheticConfig()):
    d = haversine(lat, lon, cfg.zone_center[0], cfg.zone_center[1])
    return np.exp(-0.5 * (np.asarray(d) / cfg.zone_radius_m) ** 2)


def temperature_curve(t, rng: np.random.Generator | None = None):
    """Seasonal plus diurnal temperature in Celsius at dataset times ``t``."""
    t = np.asarray(t, dtype=float)
    day = t / 86400.0
    hour = (t % 86400.0) / 3600.0
    temp = 12.0 - 11.0 * np.cos(2 * np.pi * (day - 20.0) / 365.25) - 4.0 * np.cos(2 * np.pi * (hour - 3.0) / 24.0)
    if rng is not None:
        temp = temp + rng.normal(0.0, 1.5, size=t.shape)
    return temp


def synthetic_weather(start: float, end: float, seed: int = 0) -> WeatherSeries:
    hours = np.arange(math.floor(start / 3600.0) - 1, math.ceil(end / 3600.0) + 2) * 3600.0
    rng = np.random.default_rng([seed, 1])
    return WeatherSeries(hours, np.round(temperature_curve(hours, rng), 1))


def _sample_pickups(n, rng, cfg):
    lat = np.empty(n)
    lon = np.empty(n)
    kind = rng.choice(3, size=n, p=[cfg.share_sc1_lower, cfg.share_sc1_higher,
                                    1.0 - cfg.share_sc1_lower - cfg.share_sc1_higher])
    for k, box in ((0, SC1_LOWER_BOX), (1, SC1_HIGHER_BOX)):
        idx = np.flatnonzero(kind == k)
        lat[idx] = rng.uniform(box.lat_min, box.lat_max, idx.size)
        lon[idx] = rng.uniform(box.lon_min, box.lon_max, idx.size)
    idx = np.flatnonzero(kind == 2)
    lat[idx] = rng.normal(40.755, 0.035, idx.size)
    lon[idx] = rng.normal(-73.975, 0.03, idx.size)
    inner = NYC_BOX
    lat = np.clip(lat, inner.lat_min + 0.01, inner.lat_max - 0.01)
    lon = np.clip(lon, inner.lon_min + 0.01, inner.lon_max - 0.01)
    return lat, lon


def _offset(lat, lon, dist_m, bearing):
    dlat = dist_m * np.cos(bearing) / 111_195.0
    dlon = dist_m * np.sin(bearing) / (111_195.0 * np.cos(np.radians(lat)))
    return lat + dlat, lon + dlon


def expected_duration(distance_m, hour, pickup_lat, pickup_lon, temperature, cfg: SyntheticConfig = SyntheticConfig()):
    """Noise-free duration in seconds."""
    return (cfg.base_s + cfg.c1_s_per_m * np.asarray(distance_m) * congestion(hour, cfg)
            + cfg.c2_s * zone(pickup_lat, pickup_lon, cfg) + cfg.c_temp_s_per_c * np.asarray(temperature))


@dataclass
class SyntheticData:
    trips: list[TripRecord]
    weather: WeatherSeries
    config: SyntheticConfig
    boundary: float
    planted: dict  # trip_id -> reason for injected outliers

    def constants(self) -> dict:
        d = asdict(self.config)
        d.update(hour_weights=HOUR_WEIGHTS.tolist(), train_start=TRAIN_START, test_start=TEST_START,
                 test_end=TEST_END, boundary=self.boundary, n_planted=len(self.planted))
        return d


def generate(cfg: SyntheticConfig = SyntheticConfig()) -> SyntheticData:
    """Trips in 2015 (train/validation) and early 2016 (test), hourly weather covering both."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_trips
    n_test = int(round(cfg.test_share * n))
    day_lo = np.where(np.arange(n) < n - n_test, TRAIN_START, TEST_START)
    day_hi = np.where(np.arange(n) < n - n_test, TEST_START, TEST_END)
    days = np.floor(rng.uniform(day_lo / 86400.0, day_hi / 86400.0))
    hour = rng.choice(24, size=n, p=HOUR_WEIGHTS / HOUR_WEIGHTS.sum())
    secs = np.floor(rng.uniform(0, 3600, n))
    t = days * 86400.0 + hour * 3600.0 + secs
    frac_hour = hour + secs / 3600.0

    plat, plon = _sample_pickups(n, rng, cfg)
    dist = np.clip(rng.lognormal(np.log(cfg.median_distance_m), 0.6, n), 300.0, 20_000.0)
    dlat, dlon = _offset(plat, plon, dist, rng.uniform(0, 2 * np.pi, n))
    dlat = np.clip(dlat, NYC_BOX.lat_min + 0.001, NYC_BOX.lat_max - 0.001)
    dlon = np.clip(dlon, NYC_BOX.lon_min + 0.001, NYC_BOX.lon_max - 0.001)
    true_dist = haversine(plat, plon, dlat, dlon)

    weather = synthetic_weather(float(t.min()), float(t.max()), cfg.seed)
    temp = weather.temperature[weather.nearest(t)[0]]
    y = expected_duration(true_dist, frac_hour, plat, plon, temp, cfg) + rng.normal(0.0, cfg.noise_s, n)
    # stay inside the default outlier bounds: 60-7200 s and 0.5-110 km/h
    y = np.clip(y, np.maximum(61.0, true_dist / (100 / 3.6)), np.minimum(7199.0, true_dist / (0.6 / 3.6)))
    y = np.round(y)

    order = np.argsort(t, kind="stable")
    trips = [TripRecord(k + 1, float(t[i]), float(plat[i]), float(plon[i]), float(dlat[i]), float(dlon[i]),
                        float(y[i])) for k, i in enumerate(order)]  # ids are 1-based CSV row numbers
    planted = _plant_outliers(trips, cfg, rng) if cfg.outlier_share > 0 else {}
    return SyntheticData(trips, weather, cfg, float(TEST_START), planted)


def _plant_outliers(trips: list[TripRecord], cfg: SyntheticConfig, rng) -> dict:
    """Corrupt a share of trips, one known violation each."""
    n_bad = int(round(cfg.outlier_share * len(trips)))
    picks = rng.choice(len(trips), size=n_bad, replace=False)
    planted = {}
    top = NYC_BOX.lat_max
    for k, i in enumerate(np.sort(picks)):
        t = trips[i]
        kind = k % 3
        # each corruption keeps every other criterion satisfied (speeds stay within 0.5-110 km/h)
        if kind == 0:
            t.pickup_lat, t.pickup_lon = top + 0.002, t.dropoff_lon
            t.dropoff_lat = top - 0.01
            t.duration = 600.0
            planted[t.trip_id] = "pickup outside study area"
        elif kind == 1:
            t.dropoff_lat, t.dropoff_lon = t.pickup_lat - 0.03, t.pickup_lon
            t.duration = 7300.0
            planted[t.trip_id] = "duration out of bounds"
        else:
            t.dropoff_lat, t.dropoff_lon = t.pickup_lat, t.pickup_lon
            planted[t.trip_id] = "zero distance"
    return planted
