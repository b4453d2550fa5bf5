"""Spatial-temporal traffic modeling for cellular base stations."""
from .errors import CelltideError, NoPeriodicContentError, ParseError
from .ingest import (
    HourlyDataset, RecordSchema, RegionBounds, Station, TrafficRecord,
    aggregate, bin_hourly, filter_region, interpolate_missing, parse_records,
    project, unproject,
)
from .spatial import (
    SIGMA_PRESETS, HotspotPartition, LognormalParams, SpatialSample,
    detect_hotspots, empirical_vs_model, fit_lognormal, haversine,
    lognormal_pdf, remove_hotspots, spatial_sample,
)
from .spectral import AmplitudeSpectrum, ComponentSet, amplitude_spectrum, dominant_components
from .stgen import (
    GeneratedTraffic, STModel, ValidationReport, generate, mean_profile,
    moment_match, mu_of_t, validate,
)
from .temporal import (
    REFERENCE_MODELS, Component, FitReport, SinusoidModel, evaluate, fit,
    r_squared, select_order,
)

__version__ = "0.1.0"
