"""
Spatial traffic distribution: lognormal fits, hotspot clustering and
empirical-versus-model comparison tables.

Hotspots are the connected components (single linkage) of the graph joining
any two stations closer than ``radius_m`` by great-circle distance, so a
chain of stations 100 m apart forms one hotspot even if its ends are far
apart. Components with at least two stations are hotspots.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import CelltideError
from .ingest import EARTH_RADIUS_M, HourlyDataset

HOTSPOT_RADIUS_M = 150.0
DEFAULT_BINS = 30
SPARE_HOURS = (2, 3, 4)
BUSY_HOURS = (17, 18, 19)

# empirical sigma of the spatial distribution per region type
SIGMA_PRESETS = {"park": 1.3, "campus": 3.6, "cbd": 2.8}


@dataclass(frozen=True)
class LognormalParams:
    mu: float
    sigma: float
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise CelltideError("lognormal parameters must be finite")
        if self.sigma <= 0:
            raise CelltideError(f"lognormal sigma must be > 0, got {self.sigma}")

    @property
    def mean(self):
        return math.exp(self.mu + 0.5 * self.sigma ** 2)

    @property
    def variance(self):
        s2 = self.sigma ** 2
        return math.expm1(s2) * math.exp(2 * self.mu + s2)

    def to_dict(self):
        return {"mu": self.mu, "sigma": self.sigma, "provenance": self.provenance}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["mu"], doc["sigma"], doc.get("provenance", {}))


@dataclass(frozen=True, eq=False)
class SpatialSample:
    values: np.ndarray
    region_label: str = ""
    hours_of_day: tuple = ()
    day_count: int = 0
    station_count: int = 0
    excluded_zero_count: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(~np.isfinite(v)) or np.any(v <= 0):
            raise CelltideError("spatial sample values must be positive and finite")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def provenance(self):
        return {"region_label": self.region_label, "hours_of_day": list(self.hours_of_day),
                "day_count": self.day_count, "station_count": self.station_count,
                "excluded_zero_count": self.excluded_zero_count,
                "sample_size": int(self.values.size)}


@dataclass(frozen=True)
class HotspotPartition:
    clusters: tuple           # tuple of frozensets of station ids
    radius_m: float = HOTSPOT_RADIUS_M

    @property
    def hotspot_ids(self):
        return frozenset().union(*[c for c in self.clusters if len(c) >= 2])

    @property
    def hotspots(self):
        return [c for c in self.clusters if len(c) >= 2]

    def to_dict(self):
        return {"radius_m": self.radius_m,
                "clusters": [sorted(c) for c in self.clusters],
                "hotspot_ids": sorted(self.hotspot_ids)}


def spatial_sample(ds: HourlyDataset, hours_of_day, include: str = "all",
                   partition: HotspotPartition | None = None) -> SpatialSample:
    """Collect positive per-station volumes at the given hours of day.

    Every present cell whose hour of day is in ``hours_of_day`` contributes,
    across all days. Zero cells are dropped and counted.
    """
    hours = sorted({int(h) for h in hours_of_day})
    if not hours:
        raise CelltideError("hours_of_day must be nonempty")
    if any(h < 0 or h > 23 for h in hours):
        raise CelltideError("hours_of_day must lie in 0..23")
    if include == "non_hotspot_only":
        if partition is None:
            raise CelltideError("a hotspot partition is required for non_hotspot_only")
        ds = ds.select([s for s in ds.station_ids if s not in partition.hotspot_ids])
    elif include != "all":
        raise CelltideError(f"unknown include mode {include!r}")

    rows = np.isin(ds.hour_of_day(), hours)
    cells = ds.volumes[rows]
    present = cells[~np.isnan(cells)]
    zeros = int(np.sum(present == 0))
    values = present[present > 0]
    if values.size == 0:
        raise CelltideError("spatial sample is empty")
    days = int(np.unique(ds.day_index()[rows]).size)
    return SpatialSample(values, ds.region_label, tuple(hours), days,
                         len(ds.stations), zeros)


def fit_lognormal(sample) -> LognormalParams:
    """Maximum-likelihood lognormal fit.

    ``mu`` is the mean and ``sigma`` the population (1/n) standard deviation
    of the log values. Accepts a :class:`SpatialSample` or plain array.
    """
    values = sample.values if isinstance(sample, SpatialSample) else np.asarray(sample, float)
    if values.size < 2:
        raise CelltideError("lognormal fit needs at least 2 values")
    if np.any(values <= 0):
        raise CelltideError("lognormal fit needs strictly positive values")
    logs = np.log(values)
    mu = float(np.mean(logs))
    sigma = float(np.std(logs))
    if sigma == 0.0:
        raise CelltideError("all sample values are equal; sigma would be 0")
    prov = sample.provenance if isinstance(sample, SpatialSample) else {}
    return LognormalParams(mu, sigma, prov)


def lognormal_pdf(p: LognormalParams, x):
    """Lognormal density (natural log) at ``x > 0``."""
    xx = np.asarray(x, dtype=float)
    if np.any(xx <= 0):
        raise CelltideError("lognormal pdf is defined for x > 0 only")
    z = (np.log(xx) - p.mu) / p.sigma
    out = np.exp(-0.5 * z * z) / (xx * p.sigma * math.sqrt(2 * math.pi))
    return float(out) if out.ndim == 0 else out


def lognormal_cdf(p: LognormalParams, x):
    xx = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(xx > 0, ndtr((np.log(np.maximum(xx, 1e-300)) - p.mu) / p.sigma), 0.0)
    return float(out) if out.ndim == 0 else out


def haversine(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters between two points given in degrees."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, h)))


def detect_hotspots(stations, radius_m: float = HOTSPOT_RADIUS_M) -> HotspotPartition:
    """Cluster stations closer than ``radius_m`` (strictly) via union-find.

    Clusters are listed in order of their first station.
    """
    if radius_m <= 0:
        raise CelltideError("radius_m must be positive")
    stations = list(stations)
    n = len(stations)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    # cheap latitude prefilter: |dlat| alone bounds the distance from below
    lat_slack = math.degrees(radius_m / EARTH_RADIUS_M) * 1.001
    for i in range(n):
        a = stations[i]
        for j in range(i + 1, n):
            b = stations[j]
            if abs(a.lat - b.lat) > lat_slack:
                continue
            if haversine(a.lat, a.lon, b.lat, b.lon) < radius_m:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(stations[i].station_id)
    clusters = tuple(frozenset(groups[r]) for r in sorted(groups))
    return HotspotPartition(clusters, float(radius_m))


def remove_hotspots(ds: HourlyDataset, partition: HotspotPartition) -> HourlyDataset:
    covered = frozenset().union(*partition.clusters) if partition.clusters else frozenset()
    missing = [s for s in ds.station_ids if s not in covered]
    if missing:
        raise CelltideError(f"partition does not cover stations {missing[:5]}")
    hot = partition.hotspot_ids
    keep = [s for s in ds.station_ids if s not in hot]
    if not keep:
        raise CelltideError("empty dataset: every station belongs to a hotspot")
    return ds.select(keep)


@dataclass(frozen=True)
class ComparisonRow:
    bin_lo: float
    bin_hi: float
    empirical_density: float
    model_density: float


def empirical_vs_model(sample, p: LognormalParams, n_bins: int = DEFAULT_BINS):
    """Histogram density of the sample next to the model's mean density per bin.

    Bins are equal-width over [min, max] of the sample. The model column is
    the lognormal probability mass of each bin divided by its width.
    """
    values = sample.values if isinstance(sample, SpatialSample) else np.asarray(sample, float)
    if n_bins < 2:
        raise CelltideError("n_bins must be >= 2")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        raise CelltideError("sample range is degenerate (min == max)")
    dens, edges = np.histogram(values, bins=n_bins, range=(lo, hi), density=True)
    mass = np.diff(lognormal_cdf(p, edges))
    model = mass / np.diff(edges)
    return [ComparisonRow(float(a), float(b), float(d), float(m))
            for a, b, d, m in zip(edges[:-1], edges[1:], dens, model)]


def comparison_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_lo", "bin_hi", "empirical_density", "model_density"])
    for r in rows:
        w.writerow([repr(r.bin_lo), repr(r.bin_hi), repr(r.empirical_density),
                    repr(r.model_density)])
    return buf.getvalue()
