"""
Command-line workflows: ingest, fit-temporal, fit-spatial, hotspots,
generate and pipeline.

Options come from an optional JSON config file (``--config``) and are
overridden by flags. Data goes to files under ``--out`` only; diagnostics go
to stderr, with verbosity set by ``CELLTIDE_LOG`` (quiet, info, debug).
Every command stages its outputs in a temporary directory and renames them
into place only once all of them have been written.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import re
import shutil
import sys
import tempfile
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from . import ingest, spatial, spectral, stgen, temporal
from .errors import CelltideError

log = logging.getLogger("celltide")


@dataclass
class RunConfig:
    inputs: list = field(default_factory=list)
    out: str = "out"
    regions: list = field(default_factory=list)   # [{label, min_lon, max_lon, min_lat, max_lat}]
    region: str | None = None
    schema: dict = field(default_factory=dict)
    aggregation: str = "mean"
    detrend: bool = True
    max_components: int = spectral.DEFAULT_MAX_COMPONENTS
    rel_threshold: float = spectral.DEFAULT_REL_THRESHOLD
    frequencies: list | None = None
    min_gain: float = temporal.DEFAULT_MIN_GAIN
    scale: float = ingest.DEFAULT_SCALE
    spare_hours: list = field(default_factory=lambda: list(spatial.SPARE_HOURS))
    busy_hours: list = field(default_factory=lambda: list(spatial.BUSY_HOURS))
    hours: list | None = None
    radius_m: float = spatial.HOTSPOT_RADIUS_M
    bins: int = spatial.DEFAULT_BINS
    sigma: float | None = None
    region_preset: str | None = None
    model: str | None = None
    n_stations: int = 1000
    hours_count: int = 504
    seed: int = 0

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise CelltideError(f"unknown config keys: {', '.join(unknown)}")
        if isinstance(doc.get("inputs"), str):
            doc["inputs"] = [doc["inputs"]]
        return cls(**doc)

    def check(self):
        out = Path(self.out).resolve()
        for p in self.inputs + ([self.model] if self.model else []):
            if Path(p).resolve() == out:
                raise CelltideError(f"input path {p} collides with output directory")
        if self.aggregation not in ("total", "mean"):
            raise CelltideError("aggregation must be 'total' or 'mean'")
        if self.max_components < 1:
            raise CelltideError("max_components must be >= 1")
        if not 0 < self.rel_threshold <= 1:
            raise CelltideError("rel_threshold must lie in (0, 1]")
        if self.scale <= 0:
            raise CelltideError("scale must be positive")
        if self.radius_m <= 0:
            raise CelltideError("radius must be positive")
        if self.bins < 2:
            raise CelltideError("bins must be >= 2")
        if self.sigma is not None and not self.sigma > 0:
            raise CelltideError(f"sigma must be > 0, got {self.sigma}")
        if self.region_preset is not None and self.region_preset not in spatial.SIGMA_PRESETS:
            raise CelltideError(f"unknown region preset {self.region_preset!r}")
        if self.n_stations < 1:
            raise CelltideError("n-stations must be >= 1")
        if self.hours_count < 4:
            raise CelltideError("hours-count must be >= 4 for validation")
        if not 0 <= self.seed < 2 ** 64:
            raise CelltideError("seed must be an unsigned 64-bit integer")
        for hs in (self.hours, self.spare_hours, self.busy_hours):
            if hs is not None and (not hs or any(not 0 <= h <= 23 for h in hs)):
                raise CelltideError("hour lists must be nonempty with values in 0..23")


_PI_TERM = re.compile(r"^\s*(?:(\d+(?:\.\d*)?)\s*\*?\s*)?pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_frequency(text):
    """Parse ``'pi/12'``, ``'2*pi/24'``, ``'3pi/12'`` or a plain float (rad/hour)."""
    m = _PI_TERM.match(text.lower())
    if m:
        num = float(m.group(1)) if m.group(1) else 1.0
        den = float(m.group(2)) if m.group(2) else 1.0
        return num * math.pi / den
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse frequency {text!r}") from None


def _freq_list(text):
    return [parse_frequency(t) for t in text.split(",") if t.strip()]


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


class Outputs:
    """Stage files in a temp dir, then rename them all into the output dir."""

    def __init__(self, out_dir, protected=()):
        self.out_dir = Path(out_dir)
        self.protected = {Path(p).resolve() for p in protected}
        self.names = []
        self._stage = None

    def __enter__(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.out_dir))
        return self

    def write(self, name, text):
        if name in self.names:
            raise CelltideError(f"output {name} written twice")
        if (self.out_dir / name).resolve() in self.protected:
            raise CelltideError(f"output {name} would overwrite an input file")
        (self._stage / name).write_text(text, encoding="utf-8")
        self.names.append(name)

    def write_json(self, name, doc):
        self.write(name, json.dumps(doc, sort_keys=True, indent=1) + "\n")

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                for name in self.names:
                    os.replace(self._stage / name, self.out_dir / name)
                log.info("wrote %d files to %s", len(self.names), self.out_dir)
        finally:
            shutil.rmtree(self._stage, ignore_errors=True)
        return False


def _slug(label):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label) or "region"


def _require_inputs(cfg, what):
    if not cfg.inputs:
        raise CelltideError(f"no input given (--input {what})")
    for p in cfg.inputs:
        if not Path(p).is_file():
            raise CelltideError(f"input file not found: {p}")


def _schema(cfg):
    return ingest.RecordSchema(**cfg.schema)


def _region_datasets(ds, cfg):
    regions = cfg.regions or [{"label": cfg.region or "all"}]
    out = []
    for r in regions:
        label = r["label"]
        if cfg.region and label != cfg.region:
            continue
        if "min_lon" in r:
            bounds = ingest.RegionBounds(r["min_lon"], r["max_lon"], r["min_lat"], r["max_lat"])
            sub = ingest.filter_region(ds, bounds, label)
        else:
            sub = ds.select(ds.station_ids, region_label=label)
        if not sub.stations:
            log.warning("region %s contains no stations", label)
        out.append(sub)
    if cfg.region and not out:
        raise CelltideError(f"region {cfg.region!r} not defined in config")
    return out


def _ingest_csv(cfg):
    records = ingest.RecordList()
    schema = _schema(cfg)
    # first pass fixes a common epoch across files
    per_file = [ingest.read_records(p, schema) for p in cfg.inputs]
    epochs = [r.epoch for r in per_file if r.epoch is not None]
    epoch = min(epochs) if epochs else datetime(1970, 1, 1)
    for p, recs in zip(cfg.inputs, per_file):
        if recs.epoch is not None and recs.epoch != epoch:
            recs = ingest.read_records(p, schema, epoch)
        records.extend(recs)
    log.info("parsed %d records from %d file(s)", len(records), len(cfg.inputs))
    return ingest.bin_hourly(records, epoch)


def _load_datasets(cfg):
    """Datasets from JSON inputs, or ingested and split by region from CSV."""
    _require_inputs(cfg, "PATH")
    if all(p.endswith(".json") for p in cfg.inputs):
        dss = []
        for p in cfg.inputs:
            ds = ingest.HourlyDataset.from_json(Path(p).read_text(encoding="utf-8"))
            if cfg.region and ds.region_label != cfg.region:
                continue
            dss.append(ds)
        return dss
    return _region_datasets(_ingest_csv(cfg), cfg)


# -- commands -----------------------------------------------------------------

def cmd_ingest(cfg):
    _require_inputs(cfg, "CSV")
    dss = _region_datasets(_ingest_csv(cfg), cfg)
    summary = []
    with Outputs(cfg.out, cfg.inputs) as out:
        for ds in dss:
            out.write(f"{_slug(ds.region_label)}.dataset.json", ds.to_json() + "\n")
            covered = int(np.sum(~np.all(np.isnan(ds.volumes), axis=1))) if ds.stations else 0
            summary.append({"region_label": ds.region_label, "stations": len(ds.stations),
                            "hours": ds.hours, "hours_with_data": covered,
                            "missing_fraction": ds.missing_fraction()})
        out.write_json("ingest_summary.json", {"regions": summary})
    return dss


def _fit_temporal_one(ds, cfg, out):
    label = ds.region_label
    series = ingest.aggregate(ds, cfg.aggregation, cfg.scale)
    spec = spectral.amplitude_spectrum(ingest.interpolate_missing(series), cfg.detrend)
    if cfg.frequencies:
        log.info("%s: fitting fixed frequencies %s", label, cfg.frequencies)
        comps = None
        report = temporal.fit(series, cfg.frequencies)
    else:
        comps = spectral.dominant_components(spec, cfg.max_components, cfg.rel_threshold)
        report = temporal.select_order(series, comps, cfg.min_gain)
    model = dataclasses.replace(report.model, scale=cfg.scale, region_label=label)
    report = dataclasses.replace(report, model=model)
    doc = report.to_dict()
    doc["region_label"] = label
    doc["aggregation"] = cfg.aggregation
    doc["candidates"] = None if comps is None else {
        "frequencies_rad_per_hour": list(comps.frequencies), "amplitudes": list(comps.amplitudes)}
    slug = _slug(label)
    out.write_json(f"{slug}.fit.json", doc)
    out.write(f"{slug}.model.json", model.to_json() + "\n")
    out.write(f"{slug}.spectrum.csv", spec.to_csv())
    log.info("%s: %d components, R^2 = %.4f", label, len(model.components), report.r_squared)
    return report


def cmd_fit_temporal(cfg):
    dss = _load_datasets(cfg)
    with Outputs(cfg.out, cfg.inputs) as out:
        return {ds.region_label: _fit_temporal_one(ds, cfg, out) for ds in dss}


def _hour_windows(cfg):
    if cfg.hours:
        return {"custom": cfg.hours}
    return {"spare": cfg.spare_hours, "busy": cfg.busy_hours}


def _fit_spatial_one(ds, cfg, out):
    label, slug = ds.region_label, _slug(ds.region_label)
    partition = spatial.detect_hotspots(ds.stations, cfg.radius_m)
    variants = {"all": ds}
    try:
        variants["removed"] = spatial.remove_hotspots(ds, partition)
    except CelltideError as exc:
        log.warning("%s: skipping hotspot-removed fits (%s)", label, exc)
    results = {}
    for vname, vds in variants.items():
        for wname, hours in _hour_windows(cfg).items():
            key = f"{vname}.{wname}"
            try:
                sample = spatial.spatial_sample(vds, hours)
                params = spatial.fit_lognormal(sample)
            except CelltideError as exc:
                log.warning("%s: no spatial fit for %s (%s)", label, key, exc)
                continue
            prov = dict(params.provenance, variant=vname, window=wname,
                        hotspot_count=len(partition.hotspots))
            params = spatial.LognormalParams(params.mu, params.sigma, prov)
            rows = spatial.empirical_vs_model(sample, params, cfg.bins)
            out.write(f"{slug}.spatial.{key}.json", params.to_json() + "\n")
            out.write(f"{slug}.spatial.{key}.csv", spatial.comparison_csv(rows))
            results[key] = params
    out.write_json(f"{slug}.spatial.json", {
        "region_label": label, "radius_m": cfg.radius_m, "scale_note": "values in bytes",
        "fits": {k: p.to_dict() for k, p in results.items()}})
    return results


def cmd_fit_spatial(cfg):
    dss = _load_datasets(cfg)
    with Outputs(cfg.out, cfg.inputs) as out:
        return {ds.region_label: _fit_spatial_one(ds, cfg, out) for ds in dss}


def cmd_hotspots(cfg):
    dss = _load_datasets(cfg)
    result = {}
    with Outputs(cfg.out, cfg.inputs) as out:
        for ds in dss:
            part = spatial.detect_hotspots(ds.stations, cfg.radius_m)
            doc = dict(part.to_dict(), region_label=ds.region_label)
            out.write_json(f"{_slug(ds.region_label)}.hotspots.json", doc)
            result[ds.region_label] = part
    return result


def _resolve_sigma(cfg, fitted=None):
    if cfg.sigma is not None:
        return cfg.sigma
    if cfg.region_preset:
        return spatial.SIGMA_PRESETS[cfg.region_preset]
    if fitted is not None:
        return fitted
    raise CelltideError("no sigma: pass --sigma or --region-preset")


def _write_generation(out, prefix, gen):
    report = stgen.validate(gen, max_components=3)
    out.write(f"{prefix}generated.csv", gen.to_csv())
    out.write(f"{prefix}generated.dataset.json", gen.to_dataset().to_json() + "\n")
    doc = report.to_dict()
    doc["model"] = gen.model.to_dict()
    doc["seed"] = gen.seed
    doc["hours"] = gen.hours
    out.write_json(f"{prefix}validation.json", doc)
    return report


def cmd_generate(cfg):
    if cfg.model or cfg.inputs:
        path = cfg.model or cfg.inputs[0]
        if not Path(path).is_file():
            raise CelltideError(f"model file not found: {path}")
        model = temporal.SinusoidModel.from_json(Path(path).read_text(encoding="utf-8"))
    elif cfg.region_preset:
        model = temporal.REFERENCE_MODELS[cfg.region_preset]
    else:
        raise CelltideError("no temporal model: pass --input MODEL.json or --region-preset")
    sigma = _resolve_sigma(cfg)
    label = model.region_label or cfg.region_preset or "generated"
    st = stgen.STModel(model, sigma, cfg.n_stations, label, horizon=cfg.hours_count)
    gen = stgen.generate(st, cfg.hours_count, cfg.seed)
    with Outputs(cfg.out, cfg.inputs) as out:
        report = _write_generation(out, "", gen)
    log.info("generated %dx%d, nrmse %.4f", gen.hours, gen.n_stations, report.nrmse_mean_profile)
    return gen, report


def cmd_pipeline(cfg):
    _require_inputs(cfg, "CSV")
    dss = _region_datasets(_ingest_csv(cfg), cfg)
    summary = {}
    with Outputs(cfg.out, cfg.inputs) as out:
        for ds in dss:
            slug = _slug(ds.region_label)
            out.write(f"{slug}.dataset.json", ds.to_json() + "\n")
            if not ds.stations:
                continue
            fit_report = _fit_temporal_one(ds, cfg, out)
            part = spatial.detect_hotspots(ds.stations, cfg.radius_m)
            out.write_json(f"{slug}.hotspots.json", part.to_dict())
            fits = _fit_spatial_one(ds, cfg, out)
            fitted_sigma = next((fits[k].sigma for k in ("all.busy", "all.custom", "all.spare")
                                 if k in fits), None)
            sigma = _resolve_sigma(cfg, fitted_sigma)

            model = fit_report.model
            if cfg.aggregation == "mean":
                # the generator divides the aggregate by N
                model = model.scaled(cfg.n_stations)
            st = stgen.STModel(model, sigma, cfg.n_stations, ds.region_label,
                               horizon=cfg.hours_count)
            gen = stgen.generate(st, cfg.hours_count, cfg.seed)
            report = _write_generation(out, f"{slug}.", gen)
            fitted = sorted(fit_report.model.omegas)
            produced = sorted(report.dominant_frequencies.frequencies)
            summary[ds.region_label] = {
                "fitted_frequencies": fitted,
                "generated_frequencies": produced,
                "frequencies_match": fitted == produced,
                "r_squared": fit_report.r_squared,
                "sigma": sigma,
                "nrmse_mean_profile": report.nrmse_mean_profile,
            }
        out.write_json("pipeline_report.json", {"regions": summary})
    return summary


COMMANDS = {
    "ingest": (cmd_ingest, "bin raw CSV logs into hourly per-region datasets"),
    "fit-temporal": (cmd_fit_temporal, "fit the sinusoid model to each region's aggregate series"),
    "fit-spatial": (cmd_fit_spatial, "fit lognormal spatial distributions (all / hotspots removed)"),
    "hotspots": (cmd_hotspots, "cluster stations closer than the hotspot radius"),
    "generate": (cmd_generate, "synthesize per-station traffic and validate it"),
    "pipeline": (cmd_pipeline, "ingest, fit and generate in one run with a self-consistency report"),
}

# flag -> (config field, argparse kwargs)
FLAGS = {
    "--input": ("inputs", dict(action="append", metavar="PATH",
                               help="input file (CSV log, dataset JSON or model JSON); repeatable")),
    "--out": ("out", dict(metavar="DIR", help="output directory (default: out)")),
    "--region": ("region", dict(metavar="LABEL", help="process only this region label")),
    "--frequencies": ("frequencies", dict(type=_freq_list, metavar="LIST",
                                          help="fixed fit frequencies, e.g. 'pi/12,pi/6'")),
    "--min-gain": ("min_gain", dict(type=float, metavar="F",
                                    help="minimum R^2 gain to add a component (default 0.02)")),
    "--hours": ("hours", dict(type=_int_list, metavar="LIST",
                              help="hours of day for spatial fits; replaces spare/busy windows")),
    "--radius-m": ("radius_m", dict(type=float, metavar="F",
                                    help="hotspot radius in meters (default 150)")),
    "--sigma": ("sigma", dict(type=float, metavar="F", help="lognormal sigma for generation")),
    "--region-preset": ("region_preset", dict(choices=sorted(spatial.SIGMA_PRESETS),
                                              help="region preset: sigma and reference model")),
    "--n-stations": ("n_stations", dict(type=int, metavar="INT",
                                        help="number of generated stations (default 1000)")),
    "--hours-count": ("hours_count", dict(type=int, metavar="INT",
                                          help="number of generated hours (default 504)")),
    "--seed": ("seed", dict(type=int, metavar="INT", help="generator seed (default 0)")),
    "--scale": ("scale", dict(type=float, metavar="F",
                              help="divide volumes by this before fitting (default 1e6)")),
    "--bins": ("bins", dict(type=int, metavar="INT",
                            help="histogram bins in comparison tables (default 30)")),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="celltide", description=" ".join(__doc__.strip().split("\n\n")[0].split()))
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext, description=helptext)
        p.add_argument("--config", metavar="PATH", help="JSON config file; flags override it")
        for flag, (dest, kwargs) in FLAGS.items():
            p.add_argument(flag, dest=dest, default=None, **kwargs)
    return parser


def make_config(args):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for _, (dest, _) in FLAGS.items():
        value = getattr(args, dest)
        if value is not None:
            setattr(cfg, dest, value)
    cfg.check()
    return cfg


def _setup_logging():
    level = {"quiet": logging.ERROR, "info": logging.INFO,
             "debug": logging.DEBUG}.get(os.environ.get("CELLTIDE_LOG", "info").lower(),
                                         logging.INFO)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("celltide: %(levelname)s: %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(level)
    log.propagate = False


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
        COMMANDS[args.command][0](cfg)
    except (CelltideError, OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
