import io
import json
import math
from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from celltide.errors import CelltideError, ParseError
from celltide.ingest import (
    EARTH_RADIUS_M, HourlyDataset, RecordSchema, RegionBounds, Station,
    TrafficRecord, aggregate, bin_hourly, filter_region, interpolate_missing,
    parse_records, project, unproject,
)

HEADER = "Time, BS Number, Longitude, Latitude, Traffic Volume\n"
EPOCH = datetime(2012, 9, 3)


def test_parse_table_row():
    text = HEADER + "2012/9/3 0:00, BS_1, 118.7511111, 32.05305556, 25499860\n"
    recs = parse_records(io.StringIO(text))
    assert len(recs) == 1
    r = recs[0]
    assert r == TrafficRecord(0, "BS_1", 118.7511111, 32.05305556, 25499860)
    assert recs.epoch == EPOCH


def test_parse_header_only():
    assert parse_records(io.StringIO(HEADER)) == []


def test_parse_negative_volume_reports_line():
    text = HEADER + "2012/9/3 0:00,BS_1,118.75,32.05,10\n2012/9/3 0:05,BS_1,118.75,32.05,-5\n"
    with pytest.raises(ParseError) as err:
        parse_records(io.StringIO(text))
    assert err.value.lineno == 3


@pytest.mark.parametrize("row", [
    "2012/9/3 0:00,BS_1,118.75,32.05",
    "2012/9/3 0:00,BS_1,abc,32.05,10",
    "2012-09-03T00:00,BS_1,118.75,32.05,10",
    "2012/9/3 0:00,BS_1,118.75,32.05,1.5",
])
def test_parse_malformed(row):
    with pytest.raises(ParseError) as err:
        parse_records(io.StringIO(HEADER + row + "\n"))
    assert err.value.lineno == 2


def test_parse_tab_delimited_and_custom_schema():
    text = "ts\tid\tx\ty\tbytes\n03.09.2012 01:05\tA\t1.0\t2.0\t7\n"
    schema = RecordSchema("ts", "id", "x", "y", "bytes", "%d.%m.%Y %H:%M")
    recs = parse_records(text.splitlines(), schema)
    assert recs[0].timestamp == 65 and recs[0].volume == 7


def test_parse_minutes_since_epoch():
    text = HEADER + "2012/9/4 2:05,A,1,2,1\n2012/9/3 23:55,A,1,2,1\n"
    recs = parse_records(io.StringIO(text))
    assert [r.timestamp for r in recs] == [24 * 60 + 125, 23 * 60 + 55]


def test_project_identity():
    assert project(32.05, 118.75, 32.05, 118.75) == (0.0, 0.0)


def test_project_north_offset():
    x, y = project(32.05 + 0.001, 118.75, 32.05, 118.75)
    assert x == 0.0
    assert y == pytest.approx(EARTH_RADIUS_M * 0.001 * math.pi / 180, rel=1e-9)
    assert y == pytest.approx(111.19, abs=0.005)


@given(st.floats(-60, 60), st.floats(-170, 170), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_project_symmetry_and_inverse(ref_lat, ref_lon, dlat, dlon):
    lat, lon = ref_lat + dlat, ref_lon + dlon
    x, y = project(lat, lon, ref_lat, ref_lon)
    _, y_mirror = project(2 * ref_lat - lat, lon, ref_lat, ref_lon)
    assert y == pytest.approx(-y_mirror, abs=1e-6)
    lat2, lon2 = unproject(x, y, ref_lat, ref_lon)
    x2, y2 = project(lat2, lon2, ref_lat, ref_lon)
    assert abs(x2 - x) < 1e-9 and abs(y2 - y) < 1e-9


def test_bin_sum_of_constants():
    recs = [TrafficRecord(5 * k, "A", 1.0, 2.0, 10) for k in range(12)]
    ds = bin_hourly(recs, EPOCH)
    assert ds.hours == 1 and ds.volumes[0, 0] == 120


def test_bin_absence():
    recs = [TrafficRecord(4 * 60 + 10, "B", 1.0, 2.0, 1),
            TrafficRecord(3 * 60 + 10, "A", 1.0, 2.0, 5)]
    ds = bin_hourly(recs, EPOCH)
    assert ds.station_ids == ["B", "A"]
    col = ds.volumes[:, 1]
    assert col[3] == 5
    assert np.isnan(col[[0, 1, 2, 4]]).all()


def test_dataset_is_read_only():
    ds = bin_hourly([TrafficRecord(0, "A", 1.0, 2.0, 5)], EPOCH)
    with pytest.raises(ValueError):
        ds.volumes[0, 0] = 1


def test_bin_empty():
    ds = bin_hourly([], EPOCH)
    assert ds.hours == 0 and ds.stations == ()


def _oracle_bins(records):
    ids, cells = [], {}
    for r in records:
        if r.station_id not in ids:
            ids.append(r.station_id)
        key = (r.timestamp // 60, r.station_id)
        cells[key] = cells.get(key, 0) + r.volume
    return ids, cells


record_lists = st.lists(
    st.tuples(st.integers(0, 6 * 60 - 1), st.sampled_from("ABCDE"), st.integers(0, 10 ** 9)),
    max_size=60)


@settings(max_examples=200)
@given(record_lists)
def test_bin_matches_accumulator_oracle(rows):
    recs = [TrafficRecord(t, s, 1.0, 2.0, v) for t, s, v in rows]
    ds = bin_hourly(recs, EPOCH)
    ids, cells = _oracle_bins(recs)
    assert ds.station_ids == ids
    for t in range(ds.hours):
        for j, sid in enumerate(ids):
            if (t, sid) in cells:
                assert ds.volumes[t, j] == cells[(t, sid)]
            else:
                assert np.isnan(ds.volumes[t, j])
    # mass conservation
    assert np.nansum(ds.volumes) == sum(r.volume for r in recs)


def _grid_dataset(n=6, hours=5, seed=0, mask=0.3):
    rng = np.random.default_rng(seed)
    stations = [Station(f"S{j}", 118.7 + 0.01 * j, 32.0 + 0.005 * (j % 3)) for j in range(n)]
    vol = rng.integers(0, 1000, (hours, n)).astype(float)
    vol[rng.random((hours, n)) < mask] = np.nan
    return HourlyDataset(stations, EPOCH, vol, "grid")


def test_filter_whole_box_is_identity():
    ds = _grid_dataset()
    lons = [s.lon for s in ds.stations]
    lats = [s.lat for s in ds.stations]
    sub = filter_region(ds, RegionBounds(min(lons), max(lons), min(lats), max(lats)), "all")
    assert sub.station_ids == ds.station_ids and sub.region_label == "all"
    np.testing.assert_array_equal(sub.volumes, ds.volumes)


def test_filter_degenerate_bounds():
    ds = _grid_dataset()
    s = ds.stations[2]
    sub = filter_region(ds, RegionBounds(s.lon, s.lon, s.lat, s.lat), "one")
    assert sub.station_ids == [s.station_id]


@given(st.floats(118.69, 118.76), st.floats(0, 0.06), st.floats(31.99, 32.02), st.floats(0, 0.02))
def test_filter_matches_membership_oracle(lo_lon, dlon, lo_lat, dlat):
    ds = _grid_dataset()
    b = RegionBounds(lo_lon, lo_lon + dlon, lo_lat, lo_lat + dlat)
    sub = filter_region(ds, b, "r")
    expect = {s.station_id for s in ds.stations
              if lo_lon <= s.lon <= lo_lon + dlon and lo_lat <= s.lat <= lo_lat + dlat}
    assert set(sub.station_ids) == expect
    # idempotent
    assert filter_region(sub, b, "r").station_ids == sub.station_ids


def test_filter_commutes_with_binning():
    recs = [TrafficRecord(t, sid, lon, 32.0, 3)
            for t in range(0, 300, 20) for sid, lon in (("A", 1.0), ("B", 2.0), ("C", 3.0))]
    b = RegionBounds(1.5, 3.5, 31.0, 33.0)
    a = filter_region(bin_hourly(recs, EPOCH), b, "x")
    direct = bin_hourly([r for r in recs if b.contains(r.lon, r.lat)], EPOCH, region_label="x")
    assert a.station_ids == direct.station_ids
    np.testing.assert_array_equal(a.volumes, direct.volumes)


def test_aggregate_single_station():
    ds = HourlyDataset([Station("A", 1, 2)], EPOCH, np.array([[1.0], [np.nan], [3.0]]))
    tot, mean = aggregate(ds, "total"), aggregate(ds, "mean")
    np.testing.assert_array_equal(tot, mean)
    np.testing.assert_array_equal(tot, ds.volumes[:, 0])


def test_aggregate_two_stations():
    ds = HourlyDataset([Station("A", 1, 2), Station("B", 1, 2)], EPOCH, np.array([[4.0, 6.0]]))
    assert aggregate(ds, "total")[0] == 10 and aggregate(ds, "mean")[0] == 5


def test_aggregate_no_stations():
    ds = HourlyDataset([], EPOCH, np.zeros((3, 0)))
    with pytest.raises(CelltideError):
        aggregate(ds)


@pytest.mark.parametrize("seed", range(10))
def test_aggregate_matches_loop_oracle(seed):
    ds = _grid_dataset(n=7, hours=12, seed=seed, mask=0.5)
    tot, mean = aggregate(ds, "total"), aggregate(ds, "mean")
    for t in range(ds.hours):
        present = [v for v in ds.volumes[t] if not math.isnan(v)]
        if not present:
            assert math.isnan(tot[t]) and math.isnan(mean[t])
            continue
        assert tot[t] == sum(present)
        assert mean[t] == pytest.approx(sum(present) / len(present), rel=1e-15)
        assert tot[t] == pytest.approx(mean[t] * len(present), rel=1e-12)


def test_aggregate_scale():
    ds = HourlyDataset([Station("A", 1, 2)], EPOCH, np.array([[2.5e6]]))
    assert aggregate(ds, "mean", scale=1e6)[0] == 2.5


def test_interpolate_missing():
    y = interpolate_missing([np.nan, 1.0, np.nan, 3.0, np.nan])
    np.testing.assert_array_equal(y, [1.0, 1.0, 2.0, 3.0, 3.0])


def test_json_round_trip():
    ds = _grid_dataset()
    doc = json.loads(ds.to_json())
    assert set(doc) == {"epoch", "region_label", "stations", "volumes"}
    assert doc["stations"][0] == {"id": "S0", "lon": 118.7, "lat": 32.0}
    back = HourlyDataset.from_json(ds.to_json())
    np.testing.assert_array_equal(back.volumes, ds.volumes)
    assert back.epoch == ds.epoch and back.station_ids == ds.station_ids


def test_invalid_volume_rejected():
    with pytest.raises(CelltideError):
        HourlyDataset([Station("A", 1, 2)], EPOCH, np.array([[-1.0]]))
