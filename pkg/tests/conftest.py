import math
from datetime import datetime, timedelta

import numpy as np
import pytest

from celltide.temporal import REFERENCE_MODELS, evaluate

EPOCH = datetime(2012, 9, 3)
HEADER = "Time,BS Number,Longitude,Latitude,Traffic Volume"


def stamp(dt):
    return f"{dt.year}/{dt.month}/{dt.day} {dt.hour}:{dt.minute:02d}"


def write_log(path, stations, hourly, epoch=EPOCH, period_min=60):
    """Write a CSV log; ``hourly[t, j]`` bytes for station j in hour t (NaN = skip).

    With a sub-hour period the hourly volume is split evenly (remainder to the
    first record) so the hourly sums are exact.
    """
    per_hour = 60 // period_min
    lines = [HEADER]
    for t in range(hourly.shape[0]):
        for k in range(per_hour):
            when = epoch + timedelta(hours=t, minutes=k * period_min)
            for j, (sid, lon, lat) in enumerate(stations):
                v = hourly[t, j]
                if np.isnan(v):
                    continue
                v = int(v)
                part = v // per_hour + (v % per_hour if k == 0 else 0)
                lines.append(f"{stamp(when)},{sid},{lon},{lat},{part}")
    path.write_text("\n".join(lines) + "\n")
    return path


def model_traffic(model, stations, hours, weights=None, unit=1e6):
    """Per-station bytes whose station mean (in units of ``unit``) is ``model``."""
    n = len(stations)
    w = np.ones(n) if weights is None else np.asarray(weights, float)
    w = w / w.mean()
    base = evaluate(model, np.arange(hours)) * unit
    return np.round(base[:, None] * w[None, :])


@pytest.fixture
def stations20():
    # ~560 m grid, so the only pair closer than 150 m is the one placed below
    out = []
    for j in range(20):
        out.append((f"BS_{j + 1}", round(118.74 + 0.006 * (j % 5), 7),
                    round(32.03 + 0.005 * (j // 5), 7)))
    # a two-station hotspot roughly 45 m apart
    out[1] = ("BS_2", round(out[0][1] + 0.0004, 7), round(out[0][2] + 0.0002, 7))
    return out


@pytest.fixture
def park_log(tmp_path, stations20):
    rng = np.random.default_rng(11)
    weights = rng.lognormal(0.0, 0.5, len(stations20))
    hourly = model_traffic(REFERENCE_MODELS["park"], stations20, 504, weights)
    return write_log(tmp_path / "park.csv", stations20, hourly)


# -- acceptance summary: one pass/fail line per criterion ------------------------

_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _ACCEPTANCE.append((props["criterion"], report.outcome.upper(), props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, detail in _ACCEPTANCE:
        status = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}" + (f"  [{detail}]" if detail else ""))
