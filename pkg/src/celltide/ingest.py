"""
Raw traffic log ingestion.

Turns delimiter-separated per-station traffic logs into an hourly
station-by-hour matrix (:class:`HourlyDataset`), projects station
coordinates to a local plane, slices datasets by geographic bounds and
aggregates stations into a single time series.

Absent cells (a station that did not report during an hour) are stored as
NaN in the volume matrix and are never treated as zero.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Iterable, Sequence

import numpy as np

from .errors import CelltideError, ParseError

EARTH_RADIUS_M = 6371000.0

# default scale applied before fitting: bytes -> megabytes
DEFAULT_SCALE = 1e6


@dataclass(frozen=True)
class TrafficRecord:
    """One raw log row. ``timestamp`` is in minutes since the dataset epoch."""

    timestamp: int
    station_id: str
    lon: float
    lat: float
    volume: int

    def __post_init__(self):
        if self.volume < 0:
            raise CelltideError(f"negative volume {self.volume} for {self.station_id}")
        if not -90.0 <= self.lat <= 90.0:
            raise CelltideError(f"latitude {self.lat} out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise CelltideError(f"longitude {self.lon} out of range")


@dataclass(frozen=True)
class Station:
    station_id: str
    lon: float
    lat: float
    x: float = 0.0
    y: float = 0.0


@dataclass(frozen=True)
class RegionBounds:
    min_lon: float
    max_lon: float
    min_lat: float
    max_lat: float

    def __post_init__(self):
        if self.min_lon > self.max_lon or self.min_lat > self.max_lat:
            raise CelltideError("region bounds must satisfy min <= max on both axes")

    def contains(self, lon, lat):
        return (self.min_lon <= lon <= self.max_lon
                and self.min_lat <= lat <= self.max_lat)


@dataclass(frozen=True)
class RecordSchema:
    """Column mapping for :func:`parse_records`.

    ``time_format`` is a :func:`datetime.strptime` pattern; the default
    reads stamps such as ``2012/9/3 0:05``.
    """

    timestamp: str = "Time"
    station_id: str = "BS Number"
    lon: str = "Longitude"
    lat: str = "Latitude"
    volume: str = "Traffic Volume"
    time_format: str = "%Y/%m/%d %H:%M"


class RecordList(list):
    """List of :class:`TrafficRecord` that remembers the epoch of minute 0."""

    def __init__(self, records=(), epoch=None):
        super().__init__(records)
        self.epoch = epoch


@dataclass(frozen=True, eq=False)
class HourlyDataset:
    """Station-by-hour traffic matrix.

    ``volumes`` has shape ``(hours, len(stations))``; NaN marks an absent
    cell. The array is made read-only on construction.
    """

    stations: tuple
    epoch: datetime
    volumes: np.ndarray
    region_label: str = ""

    def __post_init__(self):
        vol = np.array(self.volumes, dtype=float, copy=True)
        if vol.ndim != 2 or vol.shape[1] != len(self.stations):
            raise CelltideError(
                f"volume matrix shape {vol.shape} does not match "
                f"{len(self.stations)} stations")
        present = vol[~np.isnan(vol)]
        if np.any(~np.isfinite(present)) or np.any(present < 0):
            raise CelltideError("present volumes must be finite and non-negative")
        vol.flags.writeable = False
        object.__setattr__(self, "stations", tuple(self.stations))
        object.__setattr__(self, "volumes", vol)

    @property
    def hours(self):
        return self.volumes.shape[0]

    @property
    def station_ids(self):
        return [s.station_id for s in self.stations]

    def hour_datetime(self, t):
        return self.epoch + timedelta(hours=int(t))

    def hour_of_day(self):
        """Hour-of-day (0-23) of every hour index."""
        start = self.epoch.hour
        return (start + np.arange(self.hours)) % 24

    def day_index(self):
        """Calendar-day offset from the epoch day for every hour index."""
        return (self.epoch.hour + np.arange(self.hours)) // 24

    def select(self, station_ids, region_label=None):
        """Restrict to ``station_ids`` (kept in dataset order)."""
        keep = set(station_ids)
        idx = [i for i, s in enumerate(self.stations) if s.station_id in keep]
        return HourlyDataset(
            stations=[self.stations[i] for i in idx],
            epoch=self.epoch,
            volumes=self.volumes[:, idx],
            region_label=self.region_label if region_label is None else region_label,
        )

    def missing_fraction(self):
        if self.volumes.size == 0:
            return 0.0
        return float(np.isnan(self.volumes).mean())

    def to_dict(self):
        rows = [[None if math.isnan(v) else _plain_number(v) for v in row]
                for row in self.volumes.tolist()]
        return {
            "epoch": self.epoch.isoformat(),
            "region_label": self.region_label,
            "stations": [{"id": s.station_id, "lon": s.lon, "lat": s.lat}
                         for s in self.stations],
            "volumes": rows,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc):
        raw = doc["stations"]
        ref_lat, ref_lon = _centroid([(s["lat"], s["lon"]) for s in raw])
        stations = []
        for s in raw:
            x, y = project(s["lat"], s["lon"], ref_lat, ref_lon)
            stations.append(Station(str(s["id"]), float(s["lon"]), float(s["lat"]), x, y))
        vol = np.array([[np.nan if v is None else v for v in row]
                        for row in doc["volumes"]], dtype=float)
        if vol.size == 0:
            vol = vol.reshape(len(doc["volumes"]), len(stations))
        return cls(stations, datetime.fromisoformat(doc["epoch"]), vol,
                   doc.get("region_label", ""))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _plain_number(v):
    # integral byte counts serialize as ints so exports stay readable
    return int(v) if float(v).is_integer() and abs(v) < 2**53 else v


def _centroid(latlons):
    if not latlons:
        return 0.0, 0.0
    arr = np.asarray(latlons, dtype=float)
    return float(arr[:, 0].mean()), float(arr[:, 1].mean())


def _sniff_delimiter(header):
    return "\t" if header.count("\t") > header.count(",") else ","


def parse_records(lines: Iterable[str], schema: RecordSchema | None = None,
                  epoch: datetime | None = None) -> RecordList:
    """Parse a delimited traffic log with a header row.

    Parameters
    ----------
    lines : iterable of str
        Text lines including the header. Comma or tab delimiters are
        auto-detected from the header.
    schema : RecordSchema, optional
        Column names and timestamp format.
    epoch : datetime, optional
        Instant of minute 0. Defaults to midnight of the earliest calendar
        day present in the stream.

    Returns
    -------
    RecordList
        Records in input order; ``.epoch`` holds the epoch used.
    """
    schema = schema or RecordSchema()
    it = iter(lines)
    header_line = None
    for header_line in it:
        if header_line.strip():
            break
    else:
        return RecordList([], epoch)

    delim = _sniff_delimiter(header_line)
    header = [h.strip() for h in next(csv.reader([header_line], delimiter=delim))]
    cols = {}
    for name in ("timestamp", "station_id", "lon", "lat", "volume"):
        col = getattr(schema, name)
        if col not in header:
            raise ParseError(1, f"missing column {col!r} in header")
        cols[name] = header.index(col)

    parsed = []
    for lineno, line in enumerate(it, start=2):
        if not line.strip():
            continue
        row = [c.strip() for c in next(csv.reader([line], delimiter=delim))]
        if len(row) != len(header):
            raise ParseError(lineno, f"expected {len(header)} columns, got {len(row)}")
        try:
            when = datetime.strptime(row[cols["timestamp"]], schema.time_format)
        except ValueError as exc:
            raise ParseError(lineno, f"bad timestamp: {exc}") from None
        try:
            lon = float(row[cols["lon"]])
            lat = float(row[cols["lat"]])
            volume = int(row[cols["volume"]])
        except ValueError as exc:
            raise ParseError(lineno, f"bad number: {exc}") from None
        if volume < 0:
            raise ParseError(lineno, f"negative volume {volume}")
        if not (math.isfinite(lon) and math.isfinite(lat)
                and -180 <= lon <= 180 and -90 <= lat <= 90):
            raise ParseError(lineno, f"coordinates out of range ({lon}, {lat})")
        parsed.append((lineno, when, row[cols["station_id"]], lon, lat, volume))

    if epoch is None and parsed:
        first = min(p[1] for p in parsed)
        epoch = datetime(first.year, first.month, first.day)

    records = RecordList([], epoch)
    for lineno, when, sid, lon, lat, volume in parsed:
        delta = when - epoch
        if delta < timedelta(0):
            raise ParseError(lineno, f"timestamp {when} precedes epoch {epoch}")
        records.append(TrafficRecord(int(delta.total_seconds() // 60), sid, lon, lat, volume))
    return records


def read_records(path, schema=None, epoch=None):
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_records(fh, schema, epoch)


def project(lat, lon, ref_lat, ref_lon):
    """Equirectangular projection about a reference point, in meters."""
    x = EARTH_RADIUS_M * math.radians(lon - ref_lon) * math.cos(math.radians(ref_lat))
    y = EARTH_RADIUS_M * math.radians(lat - ref_lat)
    return x, y


def unproject(x, y, ref_lat, ref_lon):
    """Inverse of :func:`project`."""
    lat = ref_lat + math.degrees(y / EARTH_RADIUS_M)
    lon = ref_lon + math.degrees(x / (EARTH_RADIUS_M * math.cos(math.radians(ref_lat))))
    return lat, lon


def bin_hourly(records: Sequence[TrafficRecord], epoch: datetime,
               hours: int | None = None, region_label: str = "") -> HourlyDataset:
    """Sum record volumes into hourly per-station cells.

    Stations are ordered by first appearance and keep the coordinates of
    their first record. Plane coordinates are projected about the station
    centroid. ``hours`` defaults to just enough bins to hold every record.
    """
    order = {}
    coords = []
    for r in records:
        if r.station_id not in order:
            order[r.station_id] = len(order)
            coords.append((r.lat, r.lon))
    if hours is None:
        hours = max((r.timestamp // 60 for r in records), default=-1) + 1

    sums = np.zeros((hours, len(order)))
    seen = np.zeros((hours, len(order)), dtype=bool)
    for r in records:
        if r.timestamp < 0:
            raise CelltideError(f"record at minute {r.timestamp} precedes the epoch")
        t = r.timestamp // 60
        if t >= hours:
            continue
        j = order[r.station_id]
        sums[t, j] += r.volume
        seen[t, j] = True
    sums[~seen] = np.nan

    ref_lat, ref_lon = _centroid(coords)
    stations = []
    for sid, (lat, lon) in zip(order, coords):
        x, y = project(lat, lon, ref_lat, ref_lon)
        stations.append(Station(sid, lon, lat, x, y))
    return HourlyDataset(stations, epoch, sums, region_label)


def filter_region(ds: HourlyDataset, bounds: RegionBounds, label: str) -> HourlyDataset:
    """Keep the stations whose coordinates fall inside ``bounds`` (inclusive)."""
    ids = [s.station_id for s in ds.stations if bounds.contains(s.lon, s.lat)]
    return ds.select(ids, region_label=label)


def aggregate(ds: HourlyDataset, mode: str = "total", scale: float = 1.0) -> np.ndarray:
    """Collapse stations into one hourly series.

    ``mode`` is ``"total"`` (sum) or ``"mean"`` over the stations present
    in each hour. Hours with no reporting station are NaN. The result is
    divided by ``scale``.
    """
    if len(ds.stations) == 0:
        raise CelltideError("cannot aggregate a dataset with zero stations")
    if mode not in ("total", "mean"):
        raise CelltideError(f"unknown aggregation mode {mode!r}")
    vol = ds.volumes
    count = np.sum(~np.isnan(vol), axis=1)
    total = np.nansum(vol, axis=1)
    out = total if mode == "total" else total / np.maximum(count, 1)
    out = np.where(count > 0, out, np.nan)
    return out / scale


def interpolate_missing(series) -> np.ndarray:
    """Fill NaN entries by linear interpolation; edges repeat the nearest value."""
    y = np.asarray(series, dtype=float)
    ok = ~np.isnan(y)
    if not ok.any():
        raise CelltideError("series has no present values to interpolate from")
    if ok.all():
        return y.copy()
    t = np.arange(y.size)
    return np.interp(t, t[ok], y[ok])
