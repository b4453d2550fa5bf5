"""
Amplitude spectra of hourly traffic series and dominant-component picking.

Amplitudes are scaled so that a sinusoid ``A*sin(w*t + p)`` sampled over a
whole number of its periods shows up as amplitude ``A`` in its bin.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import CelltideError, NoPeriodicContentError

# daily harmonics k*2*pi/24 considered by default
DAILY_HARMONICS = tuple(k * 2.0 * math.pi / 24.0 for k in range(1, 9))

DEFAULT_MAX_COMPONENTS = 3
DEFAULT_REL_THRESHOLD = 0.15

# amplitudes below this fraction of the series magnitude are numerical zero
_ZERO_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class AmplitudeSpectrum:
    series_len: int
    frequencies: np.ndarray   # rad/hour, bins k = 1 .. T//2
    amplitudes: np.ndarray
    series_scale: float = 1.0  # max |x| of the input, used for the zero floor

    @property
    def bins(self):
        return list(zip(self.frequencies.tolist(), self.amplitudes.tolist()))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frequency_rad_per_hour", "amplitude"])
        for f, a in self.bins:
            w.writerow([repr(f), repr(a)])
        return buf.getvalue()


@dataclass(frozen=True)
class ComponentSet:
    """Selected frequencies (ascending, rad/hour) with their spectrum amplitudes."""

    frequencies: tuple
    amplitudes: tuple

    def __post_init__(self):
        if not self.frequencies:
            raise CelltideError("component set must be nonempty")
        if len(self.frequencies) != len(self.amplitudes):
            raise CelltideError("frequencies and amplitudes differ in length")
        if any(b <= a for a, b in zip(self.frequencies, self.frequencies[1:])):
            raise CelltideError("component frequencies must be distinct and ascending")

    def __len__(self):
        return len(self.frequencies)

    def by_amplitude(self):
        """Frequencies sorted by amplitude, largest first (lower frequency on ties)."""
        pairs = sorted(zip(self.frequencies, self.amplitudes), key=lambda p: (-p[1], p[0]))
        return [f for f, _ in pairs]


def amplitude_spectrum(series, detrend: bool = True) -> AmplitudeSpectrum:
    """One-sided DFT amplitude spectrum of an equally spaced hourly series.

    Bins run over ``k = 1 .. T//2``; amplitude is ``2|X_k|/T`` except at the
    Nyquist bin of an even-length series, where it is ``|X_k|/T``.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise CelltideError("series must be one-dimensional")
    T = x.size
    if T < 4:
        raise CelltideError(f"need at least 4 samples for a spectrum, got {T}")
    if not np.all(np.isfinite(x)):
        raise CelltideError("series contains absent or non-finite values; interpolate first")
    scale = float(np.max(np.abs(x))) if T else 1.0
    if detrend:
        x = x - x.mean()

    X = np.fft.rfft(x)[1:T // 2 + 1]
    amp = 2.0 * np.abs(X) / T
    if T % 2 == 0:
        amp[-1] /= 2.0
    k = np.arange(1, T // 2 + 1)
    return AmplitudeSpectrum(T, 2.0 * np.pi * k / T, amp, scale)


def _harmonic_candidates(spec, harmonics):
    T = spec.series_len
    best = {}
    for w in harmonics:
        kb = int(round(w * T / (2.0 * np.pi)))
        if kb < 1 or kb > T // 2:
            continue
        # two harmonics landing in one bin (short series): keep the first
        best.setdefault(kb, (w, float(spec.amplitudes[kb - 1])))
    return list(best.values())


def _peak_candidates(spec):
    a = spec.amplitudes
    out = []
    for i in range(a.size):
        left = a[i - 1] if i > 0 else -np.inf
        right = a[i + 1] if i + 1 < a.size else -np.inf
        if a[i] >= left and a[i] >= right:
            out.append((float(spec.frequencies[i]), float(a[i])))
    return out


def dominant_components(spec: AmplitudeSpectrum,
                        max_components: int = DEFAULT_MAX_COMPONENTS,
                        rel_threshold: float = DEFAULT_REL_THRESHOLD,
                        harmonics_only: bool = True) -> ComponentSet:
    """Pick the strongest periodic components of a spectrum.

    By default only the daily harmonics ``k*2*pi/24`` (k = 1..8) are
    candidates; each is matched to its nearest bin and reported at its exact
    harmonic frequency. With ``harmonics_only=False`` every local maximum of
    the spectrum is a candidate, reported at its bin frequency.

    A candidate is kept when its amplitude reaches ``rel_threshold`` times the
    largest candidate amplitude; the strongest ``max_components`` survive.
    """
    if max_components < 1:
        raise CelltideError("max_components must be >= 1")
    if not 0.0 < rel_threshold <= 1.0:
        raise CelltideError("rel_threshold must lie in (0, 1]")

    cands = _harmonic_candidates(spec, DAILY_HARMONICS) if harmonics_only else _peak_candidates(spec)
    if not cands:
        raise NoPeriodicContentError()
    top = max(a for _, a in cands)
    floor = _ZERO_RTOL * max(spec.series_scale, top)
    if top <= floor or top == 0.0:
        raise NoPeriodicContentError()

    cutoff = max(rel_threshold * top, floor)
    kept = [(w, a) for w, a in cands if a >= cutoff]
    kept.sort(key=lambda p: (-p[1], p[0]))
    kept = sorted(kept[:max_components])
    return ComponentSet(tuple(w for w, _ in kept), tuple(a for _, a in kept))
