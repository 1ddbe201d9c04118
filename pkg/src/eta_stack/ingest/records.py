"""Raw trip records and CSV parsing with row-level reject reporting."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .calendar import parse_timestamp


class IngestError(Exception):
    """Fatal problem with an input file (as opposed to a rejectable row)."""


@dataclass(slots=True)
class TripRecord:
    trip_id: int
    pickup_time: float
    pickup_lat: float
    pickup_lon: float
    dropoff_lat: float
    dropoff_lon: float
    duration: float
    temperature: Optional[float] = None


@dataclass(frozen=True)
class Reject:
    row: int
    reason: str

    def __str__(self):
        return f"row {self.row}: {self.reason}"


@dataclass(frozen=True)
class FormatSpec:
    """Maps TripRecord fields to CSV column names.

    Either ``duration`` or ``dropoff_time`` must be mapped; an explicit
    duration column takes precedence.
    """

    pickup_time: str
    pickup_lat: str
    pickup_lon: str
    dropoff_lat: str
    dropoff_lon: str
    duration: Optional[str] = None
    dropoff_time: Optional[str] = None
    timestamp_format: str = "%Y-%m-%d %H:%M:%S"

    def __post_init__(self):
        if self.duration is None and self.dropoff_time is None:
            raise ValueError("format needs a duration column or a dropoff timestamp column")

    def required_columns(self) -> list[str]:
        cols = [self.pickup_time, self.pickup_lat, self.pickup_lon, self.dropoff_lat, self.dropoff_lon]
        cols.append(self.duration if self.duration is not None else self.dropoff_time)
        return cols


FORMATS = {
    "generic": FormatSpec(
        pickup_time="pickup_time", pickup_lat="plat", pickup_lon="plon",
        dropoff_lat="dlat", dropoff_lon="dlon", duration="duration",
    ),
    "nyc-yellow": FormatSpec(
        pickup_time="tpep_pickup_datetime", pickup_lat="pickup_latitude",
        pickup_lon="pickup_longitude", dropoff_lat="dropoff_latitude",
        dropoff_lon="dropoff_longitude", dropoff_time="tpep_dropoff_datetime",
    ),
}


def get_format(spec) -> FormatSpec:
    if isinstance(spec, FormatSpec):
        return spec
    if isinstance(spec, str):
        try:
            return FORMATS[spec]
        except KeyError:
            raise ValueError(f"unknown format {spec!r}; known: {sorted(FORMATS)}") from None
    return FormatSpec(**spec)


@dataclass
class ParseResult:
    records: list[TripRecord]
    rejects: list[Reject] = field(default_factory=list)


def _number(text: str, what: str) -> float:
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise ValueError(f"non-numeric {what}") from None
    if not np.isfinite(v):
        raise ValueError(f"non-finite {what}")
    return v


def _parse_row(row: dict, fmt: FormatSpec, trip_id: int) -> TripRecord:
    try:
        t0 = parse_timestamp(row[fmt.pickup_time], fmt.timestamp_format)
    except (TypeError, ValueError):
        raise ValueError("unparseable pickup timestamp") from None
    plat = _number(row[fmt.pickup_lat], "latitude")
    plon = _number(row[fmt.pickup_lon], "longitude")
    dlat = _number(row[fmt.dropoff_lat], "latitude")
    dlon = _number(row[fmt.dropoff_lon], "longitude")
    for lat in (plat, dlat):
        if not -90.0 <= lat <= 90.0:
            raise ValueError("latitude out of range")
    for lon in (plon, dlon):
        if not -180.0 <= lon <= 180.0:
            raise ValueError("longitude out of range")
    if fmt.duration is not None:
        duration = _number(row[fmt.duration], "duration")
    else:
        try:
            t1 = parse_timestamp(row[fmt.dropoff_time], fmt.timestamp_format)
        except (TypeError, ValueError):
            raise ValueError("unparseable dropoff timestamp") from None
        duration = t1 - t0
    return TripRecord(trip_id, t0, plat, plon, dlat, dlon, duration)


def parse_trips(source, format_spec="generic") -> ParseResult:
    """Parse a trip CSV (path, file object or text) into TripRecords.

    Malformed rows never vanish: each becomes a :class:`Reject` carrying the
    1-based data row number (header excluded). A mapped column missing from
    the header raises :class:`IngestError`.
    """
    fmt = get_format(format_spec)
    if isinstance(source, str) and "\n" in source:
        return _parse_stream(io.StringIO(source), fmt)
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            return _parse_stream(fh, fmt)
    return _parse_stream(source, fmt)


def _parse_stream(fh: Iterable[str], fmt: FormatSpec) -> ParseResult:
    reader = csv.DictReader(fh, skipinitialspace=True)
    if reader.fieldnames is None:
        raise IngestError("empty CSV: no header row")
    header = [h.strip() for h in reader.fieldnames]
    reader.fieldnames = header
    missing = [c for c in fmt.required_columns() if c not in header]
    if missing:
        raise IngestError(f"mapped column(s) missing from header: {missing}")
    result = ParseResult([])
    for i, row in enumerate(reader, start=1):
        if None in row or any(v is None for v in row.values()):
            result.rejects.append(Reject(i, "wrong number of fields"))
            continue
        try:
            result.records.append(_parse_row(row, fmt, i))
        except ValueError as exc:
            result.rejects.append(Reject(i, str(exc)))
    return result


def trips_to_columns(trips: list[TripRecord]) -> dict[str, np.ndarray]:
    """Columnar view of a trip list for vectorised feature engineering."""
    cols = {
        "trip_id": np.array([t.trip_id for t in trips], dtype=np.int64),
        "pickup_time": np.array([t.pickup_time for t in trips], dtype=float),
        "pickup_lat": np.array([t.pickup_lat for t in trips], dtype=float),
        "pickup_lon": np.array([t.pickup_lon for t in trips], dtype=float),
        "dropoff_lat": np.array([t.dropoff_lat for t in trips], dtype=float),
        "dropoff_lon": np.array([t.dropoff_lon for t in trips], dtype=float),
        "duration": np.array([t.duration for t in trips], dtype=float),
        "temperature": np.array(
            [np.nan if t.temperature is None else t.temperature for t in trips], dtype=float
        ),
    }
    return cols


def write_trips_csv(path, trips: list[TripRecord]) -> None:
    """Write trips in the generic layout (pickup time as ``%Y-%m-%d %H:%M:%S``)."""
    from datetime import datetime, timezone

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["pickup_time", "plat", "plon", "dlat", "dlon", "duration"])
        for t in trips:
            ts = datetime.fromtimestamp(t.pickup_time, tz=timezone.utc).strftime("%Y-%m-%d %H:%M:%S")
            w.writerow([ts, repr(t.pickup_lat), repr(t.pickup_lon), repr(t.dropoff_lat),
                        repr(t.dropoff_lon), repr(t.duration)])
