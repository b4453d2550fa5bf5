"""
Spatial-temporal per-station traffic generator.

A region's aggregate sinusoid model gives the per-station mean profile
``m(t) = V(t) / N``. Each station's traffic at hour ``t`` is then an
independent lognormal draw whose log-mean ``mu(t) = ln m(t) - sigma^2/2``
makes its expectation exactly ``m(t)``; ``sigma`` is a per-region constant.

The amplitudes ``a_k`` of the temporal model are kept in ``m(t)``. Draws are
independent across hours, so single-station traces carry no temporal
autocorrelation beyond the mean profile.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .errors import CelltideError
from .ingest import HourlyDataset, Station
from .spatial import LognormalParams
from .spectral import ComponentSet, amplitude_spectrum, dominant_components
from .temporal import SinusoidModel, evaluate

DEFAULT_HORIZON = 168


@dataclass(frozen=True)
class STModel:
    """Temporal model, spatial sigma and station count of one region.

    The mean profile is checked to be positive over ``horizon`` hours at
    construction.
    """

    temporal: SinusoidModel
    sigma: float
    n_stations: int
    region_label: str = ""
    horizon: int = DEFAULT_HORIZON

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise CelltideError(f"sigma must be > 0, got {self.sigma}")
        if int(self.n_stations) != self.n_stations or self.n_stations < 1:
            raise CelltideError(f"n_stations must be an integer >= 1, got {self.n_stations}")
        _check_profile(self, self.horizon)

    def to_dict(self):
        return {"temporal": self.temporal.to_dict(), "sigma": self.sigma,
                "n_stations": int(self.n_stations), "region_label": self.region_label}


def _check_profile(model, hours):
    m = mean_profile(model, np.arange(hours))
    bad = np.flatnonzero(~(m > 0))
    if bad.size:
        raise CelltideError(
            f"mean profile non-positive at hour {int(bad[0])} (m = {m[bad[0]]:.6g})")
    return m


def mean_profile(model: STModel, t):
    """Per-station mean traffic at hour(s) ``t``."""
    return evaluate(model.temporal, t) / model.n_stations


def mu_of_t(m, sigma):
    """Log-mean giving a lognormal with mean ``m`` and log-std ``sigma``."""
    mm = np.asarray(m, dtype=float)
    if np.any(~(mm > 0)):
        raise CelltideError("mean profile non-positive")
    out = np.log(mm) - 0.5 * sigma ** 2
    return float(out) if out.ndim == 0 else out


def moment_match(m: float, v: float) -> LognormalParams:
    """Lognormal parameters with mean ``m`` and variance ``v``."""
    if not m > 0 or not v > 0:
        raise CelltideError("moment matching needs m > 0 and v > 0")
    mu = math.log(m * m / math.sqrt(v + m * m))
    sigma = math.sqrt(math.log1p(v / (m * m)))
    return LognormalParams(mu, sigma)


@dataclass(frozen=True, eq=False)
class GeneratedTraffic:
    values: np.ndarray        # (hours, n_stations), all > 0
    seed: int
    model: STModel

    @property
    def hours(self):
        return self.values.shape[0]

    @property
    def n_stations(self):
        return self.values.shape[1]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["hour", "station_index", "volume"])
        for t, row in enumerate(self.values.tolist()):
            for i, v in enumerate(row):
                w.writerow([t, i, repr(v)])
        return buf.getvalue()

    def to_dataset(self, epoch=datetime(2000, 1, 1)):
        """As an :class:`HourlyDataset`; stations carry no real location (0, 0)."""
        stations = [Station(f"gen_{i}", 0.0, 0.0) for i in range(self.n_stations)]
        return HourlyDataset(stations, epoch, self.values, self.model.region_label)


def generate(model: STModel, hours: int, seed: int) -> GeneratedTraffic:
    """Draw per-station traffic for hours ``0 .. hours-1``.

    Uses numpy's PCG64 generator seeded with ``seed``; one standard normal per
    cell, drawn hour by hour and station by station within an hour.
    """
    if hours < 1:
        raise CelltideError("hours must be >= 1")
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise CelltideError("seed must be an unsigned 64-bit integer")
    m = _check_profile(model, hours)
    mu = mu_of_t(m, model.sigma)
    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.standard_normal((hours, int(model.n_stations)))
    values = np.exp(mu[:, None] + model.sigma * z)
    values.flags.writeable = False
    return GeneratedTraffic(values, seed, model)


@dataclass(frozen=True)
class ValidationReport:
    nrmse_mean_profile: float
    dominant_frequencies: ComponentSet

    def to_dict(self):
        return {"nrmse_mean_profile": self.nrmse_mean_profile,
                "dominant_frequencies": {
                    "frequencies_rad_per_hour": list(self.dominant_frequencies.frequencies),
                    "amplitudes": list(self.dominant_frequencies.amplitudes)}}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def validate(gen: GeneratedTraffic, **spectral_options) -> ValidationReport:
    """Compare the station-mean of generated traffic with the mean profile.

    ``nrmse`` is the RMS deviation of the empirical mean from ``m(t)``
    divided by the RMS of ``m(t)``.
    """
    if gen.values.size == 0:
        raise CelltideError("generated traffic is empty")
    emp = gen.values.mean(axis=1)
    m = mean_profile(gen.model, np.arange(gen.hours))
    nrmse = float(np.sqrt(np.mean((emp - m) ** 2)) / np.sqrt(np.mean(m ** 2)))
    comps = dominant_components(amplitude_spectrum(emp, detrend=True), **spectral_options)
    return ValidationReport(nrmse, comps)
