"""Core records, calendar bucketing and distance functions."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from functools import lru_cache
from typing import Iterable, Literal, Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0088

DistanceMode = Literal["haversine", "euclid-degrees"]
DISTANCE_MODES = ("haversine", "euclid-degrees")

WeekKey = tuple  # (iso_year, iso_week)


@dataclass(frozen=True, slots=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (-90.0 <= lat <= 90.0) or math.isnan(lat):
            raise ValueError(f"latitude out of range: {self.lat!r}")
        if not (-180.0 <= lon <= 180.0) or math.isnan(lon):
            raise ValueError(f"longitude out of range: {self.lon!r}")
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)


class Confidence(str, Enum):
    HIGH = "high"
    LOW = "low"

    @classmethod
    def parse(cls, value: str) -> "Confidence":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"confidence must be 'high' or 'low', got {value!r}") from None


@dataclass(frozen=True, slots=True)
class GeoPost:
    id: str
    user_id: str
    timestamp: datetime
    location: GeoPoint
    text: str
    source: str = ""

    def __post_init__(self):
        if self.timestamp.tzinfo is None or self.timestamp.utcoffset() is None:
            raise ValueError(f"post {self.id}: timestamp must carry a UTC offset")


@dataclass(frozen=True, slots=True)
class FireHotspot:
    id: str
    date: date
    location: GeoPoint
    confidence: Confidence = Confidence.HIGH
    peatland: bool = True


@dataclass(frozen=True)
class LocalCalendar:
    """Local-time bucketing of instants into days and ISO weeks.

    The default offset is UTC+7 (Western Indonesia Time).
    """

    utc_offset: int = 420
    week_scheme: str = "ISO_WEEK"

    def __post_init__(self):
        if self.week_scheme != "ISO_WEEK":
            raise ValueError(f"unsupported week scheme {self.week_scheme!r}")
        if not -24 * 60 < self.utc_offset < 24 * 60:
            raise ValueError(f"utc offset out of range: {self.utc_offset} minutes")

    @property
    def tz(self) -> timezone:
        return _tz(self.utc_offset)


@lru_cache(maxsize=None)
def _tz(offset_minutes: int) -> timezone:
    return timezone(timedelta(minutes=offset_minutes))


def local_day(t: datetime, cal: LocalCalendar = LocalCalendar()) -> date:
    if t.tzinfo is None:
        raise ValueError("naive datetime has no defined local day")
    return t.astimezone(cal.tz).date()


def local_week(t: datetime, cal: LocalCalendar = LocalCalendar()) -> WeekKey:
    return week_of(local_day(t, cal))


def week_of(d: date) -> WeekKey:
    iso = d.isocalendar()
    return (iso[0], iso[1])


def week_start(week: WeekKey) -> date:
    return date.fromisocalendar(week[0], week[1], 1)


def week_range(first: WeekKey, last: WeekKey) -> list:
    """All ISO weeks from ``first`` to ``last`` inclusive, gap-free."""
    start, stop = week_start(first), week_start(last)
    out = []
    d = start
    while d <= stop:
        out.append(week_of(d))
        d += timedelta(days=7)
    return out


_WEEK_RE = re.compile(r"^\s*(\d{4})-?W(\d{1,2})\s*$", re.IGNORECASE)


def parse_week(text: str) -> WeekKey:
    """Parse ``2014-W11`` (or ``2014W11``) into a week key."""
    m = _WEEK_RE.match(text)
    if not m:
        raise ValueError(f"not an ISO week: {text!r} (expected e.g. 2014-W11)")
    key = (int(m.group(1)), int(m.group(2)))
    week_start(key)  # raises for week 53 in 52-week years
    return key


def format_week(week: WeekKey) -> str:
    return f"{week[0]}-W{week[1]:02d}"


def parse_timestamp(text: str) -> datetime:
    """ISO-8601 instant; a trailing ``Z`` is accepted. Offset is mandatory."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    t = datetime.fromisoformat(s)
    if t.tzinfo is None:
        raise ValueError(f"timestamp without UTC offset: {text!r}")
    return t


def format_timestamp(t: datetime) -> str:
    return t.isoformat()


# -- distances ---------------------------------------------------------------


def great_circle_km(a: GeoPoint, b: GeoPoint) -> float:
    """Haversine distance on a sphere of radius :data:`EARTH_RADIUS_KM`."""
    p1 = math.radians(a.lat)
    p2 = math.radians(b.lat)
    s_dphi = math.sin((p2 - p1) / 2.0)
    s_dlam = math.sin(math.radians(b.lon - a.lon) / 2.0)
    h = s_dphi * s_dphi + math.cos(p1) * math.cos(p2) * s_dlam * s_dlam
    return 2.0 * EARTH_RADIUS_KM * math.asin(math.sqrt(min(h, 1.0)))


def euclid_degrees(a: GeoPoint, b: GeoPoint) -> float:
    """Planar distance on raw degrees (literal-reproduction option)."""
    return math.hypot(b.lat - a.lat, b.lon - a.lon)


def point_distance(a: GeoPoint, b: GeoPoint, mode: DistanceMode = "haversine") -> float:
    if mode == "haversine":
        return great_circle_km(a, b)
    if mode == "euclid-degrees":
        return euclid_degrees(a, b)
    raise ValueError(f"unknown distance mode {mode!r}")


def haversine_array(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Vectorised haversine (km); arguments broadcast like numpy arrays."""
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    s_dphi = np.sin((p2 - p1) / 2.0)
    s_dlam = np.sin(np.radians(np.subtract(lon2, lon1)) / 2.0)
    h = s_dphi * s_dphi + np.cos(p1) * np.cos(p2) * s_dlam * s_dlam
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.minimum(h, 1.0)))


def euclid_array(lat1, lon1, lat2, lon2) -> np.ndarray:
    return np.hypot(np.subtract(lat2, lat1), np.subtract(lon2, lon1))


def distance_array(lat1, lon1, lat2, lon2, mode: DistanceMode = "haversine") -> np.ndarray:
    if mode == "haversine":
        return haversine_array(lat1, lon1, lat2, lon2)
    if mode == "euclid-degrees":
        return euclid_array(lat1, lon1, lat2, lon2)
    raise ValueError(f"unknown distance mode {mode!r}")


def destination_point(origin: GeoPoint, bearing_deg: float, distance_km: float) -> GeoPoint:
    """Point reached from ``origin`` along a great circle (spherical model)."""
    delta = distance_km / EARTH_RADIUS_KM
    theta = math.radians(bearing_deg)
    p1 = math.radians(origin.lat)
    l1 = math.radians(origin.lon)
    p2 = math.asin(math.sin(p1) * math.cos(delta) + math.cos(p1) * math.sin(delta) * math.cos(theta))
    l2 = l1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(p1),
        math.cos(delta) - math.sin(p1) * math.sin(p2),
    )
    lon = (math.degrees(l2) + 540.0) % 360.0 - 180.0
    return GeoPoint(math.degrees(p2), lon)


# -- columnar views ----------------------------------------------------------


@dataclass
class PostColumns:
    """Column arrays over a post sequence, used by the vectorised analyses."""

    ids: list
    user_ids: list
    lat: np.ndarray
    lon: np.ndarray
    day: np.ndarray  # proleptic ordinal of the local date
    sources: list = field(repr=False, default_factory=list)

    def __len__(self):
        return len(self.ids)

    def take(self, index) -> "PostColumns":
        index = np.asarray(index, dtype=np.int64)
        pick = index.tolist()
        return PostColumns([self.ids[i] for i in pick], [self.user_ids[i] for i in pick],
                           self.lat[index], self.lon[index], self.day[index],
                           [self.sources[i] for i in pick] if self.sources else [])

    @classmethod
    def from_posts(cls, posts: Sequence[GeoPost], cal: LocalCalendar = LocalCalendar()) -> "PostColumns":
        n = len(posts)
        lat = np.empty(n)
        lon = np.empty(n)
        day = np.empty(n, dtype=np.int64)
        tz = cal.tz
        for i, p in enumerate(posts):
            lat[i] = p.location.lat
            lon[i] = p.location.lon
            day[i] = p.timestamp.astimezone(tz).date().toordinal()
        return cls(
            ids=[p.id for p in posts],
            user_ids=[p.user_id for p in posts],
            lat=lat,
            lon=lon,
            day=day,
            sources=[p.source for p in posts],
        )


@dataclass
class HotspotColumns:
    ids: list
    lat: np.ndarray
    lon: np.ndarray
    day: np.ndarray

    def __len__(self):
        return len(self.ids)

    @classmethod
    def from_hotspots(cls, hotspots: Iterable[FireHotspot]) -> "HotspotColumns":
        hotspots = list(hotspots)
        return cls(
            ids=[h.id for h in hotspots],
            lat=np.array([h.location.lat for h in hotspots], dtype=float),
            lon=np.array([h.location.lon for h in hotspots], dtype=float),
            day=np.array([h.date.toordinal() for h in hotspots], dtype=np.int64),
        )
