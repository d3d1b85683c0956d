import math
from datetime import datetime, timedelta, timezone

import pytest

from hazewatch.model import FireHotspot, GeoPoint, GeoPost

WIB = timezone(timedelta(hours=7))


def at(y, m, d, hh=12, mm=0):
    return datetime(y, m, d, hh, mm, tzinfo=WIB)


def post(pid, lat, lon, when=None, user="u1", text="", source=""):
    return GeoPost(pid, user, when or at(2014, 3, 13), GeoPoint(lat, lon), text, source)


def hotspot(hid, lat, lon, day=None, **kw):
    from datetime import date
    return FireHotspot(hid, day or date(2014, 3, 13), GeoPoint(lat, lon), **kw)


def cosine_law_km(lat1, lon1, lat2, lon2, r=6371.0088):
    p1, p2 = math.radians(lat1), math.radians(lat2)
    c = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(math.radians(lon2 - lon1))
    return r * math.acos(max(-1.0, min(1.0, c)))


@pytest.fixture
def tmp_out(tmp_path):
    return tmp_path / "out"


_VERDICTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and item.get_closest_marker("acceptance"):
        detail = dict(item.user_properties).get("detail", "")
        _VERDICTS[item.name] = ("PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_VERDICTS):
        verdict, detail = _VERDICTS[name]
        terminalreporter.write_line(f"{verdict}  {name}  {detail}")
