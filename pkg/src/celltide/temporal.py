"""
Sinusoid superposition model of aggregate traffic.

The model is ``V(t) = a0 + sum_k a_k * sin(w_k * t + p_k)`` with ``t`` in
hours. Frequencies are fixed beforehand (normally by
:func:`celltide.spectral.dominant_components`), which makes the fit an
ordinary linear least-squares problem on the basis
``{1, sin(w t), cos(w t)}``.

Note on R^2: the ratio computed by :func:`r_squared` is regression sum of
squares over *total* sum of squares, both around the mean of the observed
data. Some write-ups label the denominator "SSE"; it is the total sum.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import CelltideError
from .spectral import ComponentSet

DEFAULT_MIN_GAIN = 0.02

PI = math.pi


def wrap_phase(phase):
    """Map an angle to (-pi, pi]."""
    p = math.remainder(phase, 2.0 * PI)
    return PI if p <= -PI else p


@dataclass(frozen=True)
class Component:
    omega: float      # rad/hour
    amplitude: float
    phase: float      # rad


@dataclass(frozen=True)
class SinusoidModel:
    """Constant level plus sinusoids, held in canonical form.

    Negative amplitudes are folded into the phase, phases are wrapped to
    (-pi, pi] and components are sorted by frequency on construction.
    ``scale`` and ``region_label`` are carried as metadata only.
    """

    a0: float
    components: tuple = ()
    scale: float = 1.0
    region_label: str = ""

    def __post_init__(self):
        comps = []
        for c in self.components:
            if not isinstance(c, Component):
                c = Component(*c)
            amp, ph = float(c.amplitude), float(c.phase)
            if amp < 0:
                amp, ph = -amp, ph + PI
            comps.append(Component(float(c.omega), amp, wrap_phase(ph)))
        comps.sort(key=lambda c: c.omega)
        if any(b.omega == a.omega for a, b in zip(comps, comps[1:])):
            raise CelltideError("sinusoid model frequencies must be distinct")
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "components", tuple(comps))

    @property
    def omegas(self):
        return tuple(c.omega for c in self.components)

    def __call__(self, t):
        return evaluate(self, t)

    def scaled(self, factor):
        """Model multiplied by a positive constant."""
        if factor <= 0:
            raise CelltideError("scale factor must be positive")
        return SinusoidModel(
            self.a0 * factor,
            tuple(Component(c.omega, c.amplitude * factor, c.phase) for c in self.components),
            self.scale, self.region_label)

    def to_dict(self):
        return {
            "a0": self.a0,
            "components": [{"omega_rad_per_hour": c.omega, "amplitude": c.amplitude,
                            "phase": c.phase} for c in self.components],
            "scale": self.scale,
            "region_label": self.region_label,
        }

    def to_json(self):
        # json uses repr() for floats, which round-trips exactly
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc):
        comps = tuple(Component(c["omega_rad_per_hour"], c["amplitude"], c["phase"])
                      for c in doc.get("components", []))
        return cls(doc["a0"], comps, doc.get("scale", 1.0), doc.get("region_label", ""))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class FitReport:
    model: SinusoidModel
    r_squared: float
    residual_rms: float
    n_points: int

    def to_dict(self):
        return {"model": self.model.to_dict(), "r_squared": self.r_squared,
                "residual_rms": self.residual_rms, "n_points": self.n_points}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


# Fitted models for a whole dense-urban area (total traffic) and for park,
# campus and CBD regions (mean per-station traffic). Magnitudes are in
# abstract traffic units.
REFERENCE_MODELS = {
    "whole": SinusoidModel(173.29, ((PI / 12, 89.83, 3.08), (PI / 6, 52.6, 2.08),
                                    (PI / 4, 16.68, 1.13)), region_label="whole"),
    "park": SinusoidModel(351.06, ((PI / 12, 222.7, 3.11), (PI / 6, 96.24, 2.36)),
                          region_label="park"),
    "campus": SinusoidModel(323.04, ((PI / 12, 148.3, 2.98), (PI / 6, 109.4, 2.15),
                                     (PI / 4, 38.43, 1.0)), region_label="campus"),
    "cbd": SinusoidModel(75.72, ((PI / 12, 47.52, -2.56), (PI / 6, 16.71, 1.45)),
                         region_label="cbd"),
}


def evaluate(model: SinusoidModel, t):
    """Model value at hour(s) ``t``; scalar in, scalar out."""
    tt = np.asarray(t, dtype=float)
    out = np.full(tt.shape, model.a0)
    for c in model.components:
        out = out + c.amplitude * np.sin(c.omega * tt + c.phase)
    return float(out) if out.ndim == 0 else out


def design_matrix(hours, omegas):
    """Columns ``1, sin(w1 t), cos(w1 t), sin(w2 t), ...``."""
    t = np.asarray(hours, dtype=float)
    cols = [np.ones_like(t)]
    for w in omegas:
        cols.append(np.sin(w * t))
        cols.append(np.cos(w * t))
    return np.column_stack(cols)


def _as_omegas(frequencies):
    if isinstance(frequencies, ComponentSet):
        return list(frequencies.frequencies)
    return [float(w) for w in frequencies]


def fit(series, frequencies, hours=None) -> FitReport:
    """Least-squares fit of a sinusoid model with the given frequencies.

    Parameters
    ----------
    series : array_like
        Observed values; NaN entries are absent and left out of the fit.
    frequencies : ComponentSet or sequence of float
        Angular frequencies in rad/hour, distinct and nonzero.
    hours : array_like, optional
        Hour index of every sample, ``0 .. len(series)-1`` by default.

    Returns
    -------
    FitReport
    """
    y = np.asarray(series, dtype=float)
    t = np.arange(y.size, dtype=float) if hours is None else np.asarray(hours, dtype=float)
    if t.shape != y.shape:
        raise CelltideError("hours and series differ in length")
    omegas = _as_omegas(frequencies)
    if any(w == 0 for w in omegas):
        raise CelltideError("fit frequencies must be nonzero")
    if len(set(omegas)) != len(omegas):
        raise CelltideError("fit frequencies must be distinct (rank-deficient basis)")

    ok = ~np.isnan(y)
    y, t = y[ok], t[ok]
    ncols = 2 * len(omegas) + 1
    if y.size < ncols:
        raise CelltideError(f"need at least {ncols} present points, got {y.size}")

    A = design_matrix(t, omegas)
    coef, _, rank, sv = np.linalg.lstsq(A, y, rcond=None)
    if rank < ncols or sv[-1] <= sv[0] * 1e-10:
        raise CelltideError("rank-deficient design matrix (aliased or duplicate frequencies)")

    comps = []
    for i, w in enumerate(omegas):
        s, c = coef[1 + 2 * i], coef[2 + 2 * i]
        comps.append(Component(w, math.hypot(s, c), math.atan2(c, s)))
    model = SinusoidModel(coef[0], tuple(comps))

    fitted = A @ coef
    resid = y - fitted
    if np.ptp(y) == 0:
        r2 = 1.0  # constant data is reproduced exactly by the intercept
    else:
        r2 = r_squared(fitted, y)
    return FitReport(model, r2, float(np.sqrt(np.mean(resid ** 2))), int(y.size))


def r_squared(fitted, original) -> float:
    """Coefficient of determination ``sum((yhat - ybar)^2) / sum((y - ybar)^2)``.

    ``ybar`` is the mean of the original data.
    """
    yh = np.asarray(fitted, dtype=float)
    y = np.asarray(original, dtype=float)
    if yh.shape != y.shape or y.size < 2:
        raise CelltideError("r_squared needs two equal-length series of >= 2 values")
    ybar = y.mean()
    sst = np.sum((y - ybar) ** 2)
    if sst == 0:
        raise CelltideError("original data is constant; R^2 undefined")
    return float(np.sum((yh - ybar) ** 2) / sst)


def select_order(series, candidates, min_gain: float = DEFAULT_MIN_GAIN,
                 hours=None) -> FitReport:
    """Grow the model one component at a time, strongest candidate first.

    Stops before the first candidate whose addition raises R^2 by less than
    ``min_gain``; ``min_gain <= 0`` keeps every candidate.
    """
    if isinstance(candidates, ComponentSet):
        order = candidates.by_amplitude()
    else:
        order = [float(w) for w in candidates]
    if not order:
        raise CelltideError("no candidate frequencies")

    best = fit(series, order[:1], hours)
    for n in range(2, len(order) + 1):
        trial = fit(series, order[:n], hours)
        if min_gain > 0 and trial.r_squared - best.r_squared < min_gain:
            break
        best = trial
    return best
