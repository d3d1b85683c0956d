import math
import random
from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hazewatch.ingest import format_post, parse_post_line
from hazewatch.model import (
    EARTH_RADIUS_KM,
    GeoPoint,
    GeoPost,
    LocalCalendar,
    destination_point,
    distance_array,
    euclid_degrees,
    great_circle_km,
    haversine_array,
    local_day,
    local_week,
    parse_timestamp,
    parse_week,
    format_week,
    week_of,
)

from conftest import cosine_law_km

lats = st.floats(-90, 90, allow_nan=False)
lons = st.floats(-180, 180, allow_nan=False)
points = st.builds(GeoPoint, lats, lons)


def test_geopoint_rejects_out_of_range():
    with pytest.raises(ValueError):
        GeoPoint(95, 0)
    with pytest.raises(ValueError):
        GeoPoint(0, 181)
    with pytest.raises(ValueError):
        GeoPoint(float("nan"), 0)


def test_naive_timestamp_rejected():
    with pytest.raises(ValueError):
        GeoPost("p", "u", datetime(2014, 3, 13), GeoPoint(0, 0), "")


def test_identity_distance_is_zero():
    assert great_circle_km(GeoPoint(0, 0), GeoPoint(0, 0)) == 0.0


def test_antipodal_equator_against_cosine_law():
    oracle = cosine_law_km(0, 0, 0, 180)
    assert oracle == pytest.approx(math.pi * 6371.0088, abs=1e-9)
    assert abs(great_circle_km(GeoPoint(0, 0), GeoPoint(0, 180)) - oracle) < 1e-6


def test_random_pairs_against_cosine_law():
    rng = random.Random(12345)
    for _ in range(1000):
        a = GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180))
        b = GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180))
        oracle = cosine_law_km(a.lat, a.lon, b.lat, b.lon)
        # the arccos form loses precision for tiny separations; random pairs are far apart
        assert abs(great_circle_km(a, b) - oracle) < 1e-6


def test_array_matches_scalar():
    rng = np.random.default_rng(3)
    la1, la2 = rng.uniform(-60, 60, (2, 200))
    lo1, lo2 = rng.uniform(-180, 180, (2, 200))
    arr = haversine_array(la1, lo1, la2, lo2)
    for i in range(200):
        assert arr[i] == pytest.approx(great_circle_km(GeoPoint(la1[i], lo1[i]), GeoPoint(la2[i], lo2[i])),
                                       abs=1e-9)


def test_euclid_mode():
    assert euclid_degrees(GeoPoint(0, 0), GeoPoint(3, 4)) == 5.0
    assert distance_array(0.0, 0.0, 3.0, 4.0, "euclid-degrees") == 5.0
    with pytest.raises(ValueError):
        distance_array(0.0, 0.0, 3.0, 4.0, "manhattan")


@given(points, points)
def test_symmetry(a, b):
    assert great_circle_km(a, b) == great_circle_km(b, a)


@given(points)
def test_self_distance_exactly_zero(a):
    assert great_circle_km(a, a) == 0.0


@given(points, points, points)
def test_triangle_inequality(a, b, c):
    assert great_circle_km(a, c) <= great_circle_km(a, b) + great_circle_km(b, c) + 1e-9


@given(points, points)
def test_bounded_by_half_circumference(a, b):
    d = great_circle_km(a, b)
    assert 0.0 <= d <= math.pi * EARTH_RADIUS_KM + 1e-9


@given(st.floats(-80, 80), st.floats(-179, 179), st.floats(0, 360), st.floats(0.01, 500))
def test_destination_point_distance(lat, lon, bearing, km):
    q = destination_point(GeoPoint(lat, lon), bearing, km)
    assert great_circle_km(GeoPoint(lat, lon), q) == pytest.approx(km, rel=1e-9, abs=1e-9)


@given(points)
def test_geopoint_roundtrips_through_post_file(p):
    ts = datetime(2014, 3, 13, 8, 0, tzinfo=timezone(timedelta(hours=7)))
    back = parse_post_line(format_post(GeoPost("x", "u", ts, p, "t")))
    assert abs(back.location.lat - p.lat) <= 1e-9
    assert abs(back.location.lon - p.lon) <= 1e-9


@pytest.mark.parametrize("stamp, expected", [
    ("2014-03-13T00:30+07:00", date(2014, 3, 13)),
    ("2014-03-12T18:30Z", date(2014, 3, 13)),
    ("2014-03-13T16:59Z", date(2014, 3, 13)),
    ("2014-03-13T17:00Z", date(2014, 3, 14)),
])
def test_local_day(stamp, expected):
    assert local_day(parse_timestamp(stamp), LocalCalendar(420)) == expected


def test_local_day_other_offset():
    t = parse_timestamp("2014-03-12T18:30Z")
    assert local_day(t, LocalCalendar(0)) == date(2014, 3, 12)


@pytest.mark.parametrize("d, expected", [
    (date(2014, 1, 6), (2014, 2)),
    (date(2014, 3, 13), (2014, 11)),
    (date(2014, 12, 29), (2015, 1)),
    (date(2014, 1, 1), (2014, 1)),
])
def test_iso_weeks(d, expected):
    assert week_of(d) == expected


def test_local_week_from_instant():
    assert local_week(parse_timestamp("2014-03-12T18:30Z")) == (2014, 11)


def test_week_text_roundtrip():
    assert parse_week("2014-W11") == (2014, 11)
    assert format_week((2015, 1)) == "2015-W01"
    with pytest.raises(ValueError):
        parse_week("2014-11")


@given(st.datetimes(min_value=datetime(2000, 1, 1), max_value=datetime(2030, 1, 1)),
       st.integers(0, 10 ** 6))
def test_local_day_monotone(t, step):
    t = t.replace(tzinfo=timezone.utc)
    assert local_day(t) <= local_day(t + timedelta(seconds=step))


def test_calendar_validation():
    with pytest.raises(ValueError):
        LocalCalendar(24 * 60)
    with pytest.raises(ValueError):
        LocalCalendar(0, "US_WEEK")
