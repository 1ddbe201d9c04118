"""Hourly temperature series and the nearest-reading join onto trips."""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass

import numpy as np

from .calendar import parse_timestamp
from .records import IngestError, Reject, TripRecord

DEFAULT_MAX_GAP_S = 3 * 3600.0


@dataclass(frozen=True)
class WeatherSeries:
    times: np.ndarray
    temperature: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.temperature, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size == 0:
            raise ValueError("weather series needs equal-length, non-empty 1-d arrays")
        if np.any(np.diff(t) <= 0):
            raise ValueError("weather timestamps must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "temperature", v)

    def nearest(self, t):
        """Index of and distance to the nearest reading; ties go to the earlier one."""
        t = np.asarray(t, dtype=float)
        right = np.searchsorted(self.times, t, side="left")
        right_c = np.clip(right, 0, self.times.size - 1)
        left_c = np.clip(right - 1, 0, self.times.size - 1)
        d_left = np.abs(t - self.times[left_c])
        d_right = np.abs(self.times[right_c] - t)
        take_left = d_left <= d_right
        idx = np.where(take_left, left_c, right_c)
        return idx, np.where(take_left, d_left, d_right)


def read_weather(path, timestamp_format: str = "%Y-%m-%d %H:%M:%S") -> WeatherSeries:
    """Read a ``timestamp,temperature_c`` CSV."""
    times, temps = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"timestamp", "temperature_c"} <= set(reader.fieldnames):
            raise IngestError("weather CSV needs columns timestamp, temperature_c")
        for i, row in enumerate(reader, start=1):
            try:
                times.append(parse_timestamp(row["timestamp"], timestamp_format))
                temps.append(float(row["temperature_c"]))
            except (TypeError, ValueError) as exc:
                raise IngestError(f"weather row {i}: {exc}") from None
    return WeatherSeries(np.array(times), np.array(temps))


def write_weather(path, weather: WeatherSeries) -> None:
    from datetime import datetime, timezone

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "temperature_c"])
        for t, v in zip(weather.times, weather.temperature):
            w.writerow([datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%d %H:%M:%S"), repr(float(v))])


def attach_temperature(trips: list[TripRecord], weather: WeatherSeries,
                       max_gap: float = DEFAULT_MAX_GAP_S) -> tuple[list[TripRecord], list[Reject]]:
    """Set each trip's temperature from the nearest hourly reading.

    Trips whose nearest reading is more than ``max_gap`` seconds away are
    excluded with reason ``"no weather"``.
    """
    if not trips:
        return [], []
    t = np.array([tr.pickup_time for tr in trips])
    idx, dist = weather.nearest(t)
    kept, rejects = [], []
    for tr, i, d in zip(trips, idx, dist):
        if d > max_gap:
            rejects.append(Reject(tr.trip_id, "no weather"))
        else:
            kept.append(dataclasses.replace(tr, temperature=float(weather.temperature[i])))
    return kept, rejects
