"""Calendar features of a pickup timestamp.

Timestamps are seconds since the epoch of the dataset's local wall clock,
i.e. a naive local datetime encoded as if it were UTC.
"""

from __future__ import annotations

import calendar
from datetime import datetime

import numpy as np

BIN_MINUTES = 5
BINS_PER_DAY = 24 * 60 // BIN_MINUTES


def to_timestamp(dt: datetime) -> float:
    """Naive local datetime to dataset seconds (no zone conversion)."""
    return float(calendar.timegm(dt.timetuple())) + dt.microsecond * 1e-6


def parse_timestamp(text: str, fmt: str = "%Y-%m-%d %H:%M:%S") -> float:
    return to_timestamp(datetime.strptime(text.strip(), fmt))


def time_bin(hour, minute):
    return (np.asarray(hour) * 60 + np.asarray(minute)) // BIN_MINUTES


def time_features(pickup_time):
    """Return ``(month, week, weekday, time_bin)`` for timestamps.

    ``month`` is 1-12, ``week`` the ISO-8601 week number, ``weekday`` 0 for
    Monday, ``time_bin`` the index of the 5-minute slot of the day (0-287).
    """
    t = np.floor(np.asarray(pickup_time, dtype=float)).astype(np.int64)
    days = np.floor_divide(t, 86400)
    secs = t - days * 86400
    weekday = (days + 3) % 7  # 1970-01-01 was a Thursday
    minute_of_day = secs // 60
    tbin = minute_of_day // BIN_MINUTES

    d64 = days.astype("datetime64[D]")
    month = (d64.astype("datetime64[M]").astype(np.int64) % 12) + 1

    # ISO week: week containing the Thursday of this Monday-based week
    thursday = days - weekday + 3
    th64 = thursday.astype("datetime64[D]")
    year_start = th64.astype("datetime64[Y]").astype("datetime64[D]")
    week = (th64 - year_start).astype(np.int64) // 7 + 1

    out = (month, week, weekday, tbin)
    if np.ndim(pickup_time) == 0:
        return tuple(int(v) for v in out)
    return tuple(v.astype(np.int64) for v in out)
