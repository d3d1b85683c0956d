"""Readers, validators and writers for the four input datasets.

Formats
-------
Hotspots
    CSV with header ``id,date,lat,lon,confidence,peatland``; ``confidence``
    is ``high``/``low`` and ``peatland`` is ``true``/``false``.
Posts
    One record per line, ``id,user_id,timestamp,lat,lon,source,text``.
    ``text`` is last and keeps any commas.  Backslash escapes ``\\n``,
    ``\\r`` and ``\\\\`` are decoded in ``source`` and ``text``; ``\\,``
    protects a comma inside ``source``.  An optional header line equal to
    the field list is skipped.
Regions
    Either a CSV with header ``code,province,subdistrict,polygon`` where
    ``polygon`` is ``lat lon;lat lon;...`` and an empty ``subdistrict``
    marks the region outline, or a GeoJSON FeatureCollection of Polygon
    features with properties ``postal_code``, ``province`` and optional
    ``subdistrict``.
Air quality
    CSV ``region_code,date,class``; classes ``G``, ``BL``, ``Y``, ``R``,
    ``B`` (black); ``-`` or an empty cell is a missing reading.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from functools import total_ordering
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import DuplicateKey, FormatError
from .model import (
    Confidence,
    FireHotspot,
    GeoPoint,
    GeoPost,
    format_timestamp,
    parse_timestamp,
)

log = logging.getLogger(__name__)

HOTSPOT_FIELDS = ("id", "date", "lat", "lon", "confidence", "peatland")
POST_FIELDS = ("id", "user_id", "timestamp", "lat", "lon", "source", "text")
POST_HEADER = ",".join(POST_FIELDS)

_TRUE = {"true", "1", "yes", "y", "t"}
_FALSE = {"false", "0", "no", "n", "f"}


# -- hotspots ----------------------------------------------------------------


@dataclass
class HotspotReport:
    total: int = 0
    after_peat_filter: int = 0
    after_confidence_filter: int = 0
    malformed: int = 0
    errors: list = field(default_factory=list)

    def as_tuple(self):
        return (self.total, self.after_peat_filter, self.after_confidence_filter)

    @property
    def malformed_fraction(self) -> float:
        seen = self.total + self.malformed
        return self.malformed / seen if seen else 0.0


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_hotspot(row: dict) -> FireHotspot:
    for col in HOTSPOT_FIELDS:
        if row.get(col) is None:
            raise _FieldError(col, "missing field")
    hid = row["id"].strip()
    if not hid:
        raise _FieldError("id", "empty id")
    try:
        d = date.fromisoformat(row["date"].strip())
    except ValueError as e:
        raise _FieldError("date", str(e)) from None
    try:
        loc = GeoPoint(float(row["lat"]), float(row["lon"]))
    except ValueError as e:
        raise _FieldError("lat/lon", str(e)) from None
    try:
        conf = Confidence.parse(row["confidence"])
    except ValueError as e:
        raise _FieldError("confidence", str(e)) from None
    try:
        peat = _parse_bool(row["peatland"])
    except ValueError as e:
        raise _FieldError("peatland", str(e)) from None
    return FireHotspot(hid, d, loc, conf, peat)


class _FieldError(ValueError):
    def __init__(self, column, message):
        self.column = column
        super().__init__(message)


def load_hotspots(
    path,
    *,
    peatland_only: bool = True,
    high_confidence_only: bool = True,
    strict: bool = False,
):
    """Read and filter a hotspot CSV.

    Returns ``(hotspots, report)``.  The peat filter is applied before the
    confidence filter so the report counts are monotone.
    """
    path = Path(path)
    report = HotspotReport()
    kept = []
    seen = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return kept, report
        missing = [c for c in HOTSPOT_FIELDS if c not in reader.fieldnames]
        if missing:
            raise FormatError(f"missing columns {missing}", path=path, line=1)
        for row in reader:
            line = reader.line_num
            try:
                h = _parse_hotspot(row)
                if h.id in seen:
                    raise _FieldError("id", f"duplicate id {h.id!r}")
            except _FieldError as e:
                if strict:
                    raise FormatError(str(e), path=path, line=line, column=e.column) from None
                report.malformed += 1
                if len(report.errors) < 20:
                    report.errors.append(f"line {line}: {e.column}: {e}")
                continue
            seen.add(h.id)
            report.total += 1
            if peatland_only and not h.peatland:
                continue
            report.after_peat_filter += 1
            if high_confidence_only and h.confidence is not Confidence.HIGH:
                continue
            report.after_confidence_filter += 1
            kept.append(h)
    return kept, report


def write_hotspots(path, hotspots: Iterable[FireHotspot]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HOTSPOT_FIELDS)
        for h in hotspots:
            w.writerow(
                [h.id, h.date.isoformat(), repr(h.location.lat), repr(h.location.lon),
                 h.confidence.value, "true" if h.peatland else "false"]
            )


# -- posts -------------------------------------------------------------------


@dataclass
class PostReport:
    total: int = 0
    accepted: int = 0
    malformed: int = 0
    out_of_bbox: int = 0
    errors: list = field(default_factory=list)

    @property
    def malformed_fraction(self) -> float:
        return self.malformed / self.total if self.total else 0.0


def _escape(s: str, comma: bool = False) -> str:
    s = s.replace("\\", "\\\\").replace("\n", "\\n").replace("\r", "\\r")
    if comma:
        s = s.replace(",", "\\,")
    return s


def _unescape(s: str) -> str:
    if "\\" not in s:
        return s
    out = []
    i = 0
    n = len(s)
    while i < n:
        c = s[i]
        if c == "\\" and i + 1 < n:
            nxt = s[i + 1]
            out.append({"n": "\n", "r": "\r", "\\": "\\", ",": ","}.get(nxt, "\\" + nxt))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def _split_source_text(rest: str):
    i = 0
    n = len(rest)
    while i < n:
        c = rest[i]
        if c == "\\":
            i += 2
            continue
        if c == ",":
            return rest[:i], rest[i + 1:]
        i += 1
    raise _FieldError("text", "missing text field")


def format_post(p: GeoPost) -> str:
    for name, value in (("id", p.id), ("user_id", p.user_id)):
        if "," in value or "\n" in value:
            raise ValueError(f"{name} may not contain ',' or newlines: {value!r}")
    return ",".join(
        [p.id, p.user_id, format_timestamp(p.timestamp), repr(p.location.lat),
         repr(p.location.lon), _escape(p.source, comma=True), _escape(p.text)]
    )


def parse_post_line(line: str) -> GeoPost:
    parts = line.split(",", 5)
    if len(parts) < 6:
        raise _FieldError(POST_FIELDS[len(parts)] if len(parts) < 7 else "text", "too few fields")
    pid, uid, ts, lat, lon, rest = parts
    if not pid.strip():
        raise _FieldError("id", "empty id")
    try:
        t = parse_timestamp(ts)
    except ValueError as e:
        raise _FieldError("timestamp", str(e)) from None
    try:
        loc = GeoPoint(float(lat), float(lon))
    except ValueError as e:
        raise _FieldError("lat/lon", str(e)) from None
    source, text = _split_source_text(rest)
    return GeoPost(pid.strip(), uid.strip(), t, loc, _unescape(text), _unescape(source))


class PostReader:
    """Streaming reader over a post file.

    Iterating yields :class:`GeoPost` records in file order while
    :attr:`report` accumulates counts.  Only the current line is held in
    memory unless ``unique_ids`` is set.

    ``bbox`` is ``(min_lat, min_lon, max_lat, max_lon)``.
    """

    def __init__(self, path, *, bbox: Optional[Sequence[float]] = None,
                 strict: bool = False, unique_ids: bool = False):
        self.path = Path(path)
        self.bbox = tuple(bbox) if bbox is not None else None
        self.strict = strict
        self.unique_ids = unique_ids
        self.report = PostReport()

    def __iter__(self) -> Iterator[GeoPost]:
        self.report = report = PostReport()
        seen = set() if self.unique_ids else None
        bbox = self.bbox
        with self.path.open(encoding="utf-8", newline="\n") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n").rstrip("\r")
                if not line.strip():
                    continue
                if lineno == 1 and line == POST_HEADER:
                    continue
                report.total += 1
                try:
                    post = parse_post_line(line)
                    if seen is not None:
                        if post.id in seen:
                            raise _FieldError("id", f"duplicate id {post.id!r}")
                        seen.add(post.id)
                except _FieldError as e:
                    if self.strict:
                        raise FormatError(str(e), path=self.path, line=lineno, column=e.column) from None
                    report.malformed += 1
                    if len(report.errors) < 20:
                        report.errors.append(f"line {lineno}: {e.column}: {e}")
                    continue
                if bbox is not None:
                    lat, lon = post.location.lat, post.location.lon
                    if not (bbox[0] <= lat <= bbox[2] and bbox[1] <= lon <= bbox[3]):
                        report.out_of_bbox += 1
                        continue
                report.accepted += 1
                yield post


def load_posts(path, *, bbox=None, strict: bool = False, unique_ids: bool = False) -> PostReader:
    return PostReader(path, bbox=bbox, strict=strict, unique_ids=unique_ids)


def write_posts(path, posts: Iterable[GeoPost]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(POST_HEADER + "\n")
        for p in posts:
            fh.write(format_post(p))
            fh.write("\n")


# -- regions -----------------------------------------------------------------


def _segments_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    if o1 != o2 and o3 != o4:
        return True
    return (
        (o1 == 0 and on_seg(p1, p2, p3))
        or (o2 == 0 and on_seg(p1, p2, p4))
        or (o3 == 0 and on_seg(p3, p4, p1))
        or (o4 == 0 and on_seg(p3, p4, p2))
    )


def close_ring(points: Sequence[GeoPoint]) -> tuple:
    pts = tuple(points)
    if pts and pts[0] != pts[-1]:
        pts = pts + (pts[0],)
    return pts


def validate_ring(ring: Sequence[GeoPoint], label: str = "polygon") -> tuple:
    """Close the ring and check it is simple (O(n^2) segment test)."""
    ring = close_ring(ring)
    if len(ring) < 4 or len(set(ring[:-1])) < 3:
        raise ValueError(f"{label}: needs at least 3 distinct vertices")
    xy = [(p.lon, p.lat) for p in ring]
    n = len(xy) - 1
    for i in range(n):
        if xy[i] == xy[i + 1]:
            raise ValueError(f"{label}: repeated consecutive vertex {i}")
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(xy[i], xy[i + 1], xy[j], xy[j + 1]):
                raise ValueError(f"{label}: self-intersection between edges {i} and {j}")
    return ring


@dataclass(frozen=True)
class RegionDef:
    code: str
    province: str
    polygon: tuple
    subdistricts: tuple = ()  # ((name, ring), ...)

    def __post_init__(self):
        object.__setattr__(self, "polygon", validate_ring(self.polygon, f"region {self.code}"))
        subs = tuple(
            (name, validate_ring(ring, f"region {self.code} sub-district {name}"))
            for name, ring in self.subdistricts
        )
        object.__setattr__(self, "subdistricts", subs)

    @property
    def has_subdistricts(self) -> bool:
        return bool(self.subdistricts)


def _ring_from_text(text: str) -> list:
    pts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        lat, lon = chunk.split()
        pts.append(GeoPoint(float(lat), float(lon)))
    return pts


def ring_to_text(ring: Sequence[GeoPoint]) -> str:
    return ";".join(f"{p.lat!r} {p.lon!r}" for p in ring)


def _assemble_regions(outlines, subs, path) -> list:
    regions = []
    for code, (province, ring, line) in outlines.items():
        try:
            regions.append(RegionDef(code, province, tuple(ring), tuple(subs.get(code, ()))))
        except ValueError as e:
            raise FormatError(str(e), path=path, line=line) from None
    orphan = set(subs) - set(outlines)
    if orphan:
        raise FormatError(f"sub-districts for unknown regions {sorted(orphan)}", path=path)
    return regions


def _load_regions_csv(path: Path) -> list:
    outlines: dict = {}
    subs: dict = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = ("code", "province", "subdistrict", "polygon")
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in need):
            raise FormatError(f"expected header {','.join(need)}", path=path, line=1)
        for row in reader:
            line = reader.line_num
            code = (row["code"] or "").strip()
            if not code:
                raise FormatError("empty region code", path=path, line=line, column="code")
            try:
                ring = _ring_from_text(row["polygon"] or "")
            except ValueError as e:
                raise FormatError(str(e), path=path, line=line, column="polygon") from None
            sub = (row["subdistrict"] or "").strip()
            if sub:
                subs.setdefault(code, []).append((sub, tuple(ring)))
            else:
                if code in outlines:
                    raise DuplicateKey(f"duplicate region {code}", path=path, line=line)
                outlines[code] = ((row["province"] or "").strip(), ring, line)
    return _assemble_regions(outlines, subs, path)


def _load_regions_geojson(path: Path) -> list:
    doc = json.loads(path.read_text("utf-8"))
    if doc.get("type") != "FeatureCollection":
        raise FormatError("expected a GeoJSON FeatureCollection", path=path)
    outlines: dict = {}
    subs: dict = {}
    for i, feat in enumerate(doc.get("features", [])):
        props = feat.get("properties") or {}
        geom = feat.get("geometry") or {}
        code = str(props.get("postal_code", "")).strip()
        if not code:
            raise FormatError(f"feature {i}: missing postal_code", path=path)
        if geom.get("type") != "Polygon":
            raise FormatError(f"feature {i}: only Polygon geometries are supported", path=path)
        try:
            ring = [GeoPoint(float(lat), float(lon)) for lon, lat, *_ in geom["coordinates"][0]]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise FormatError(f"feature {i}: bad coordinates ({e})", path=path) from None
        sub = props.get("subdistrict")
        if sub:
            subs.setdefault(code, []).append((str(sub), tuple(ring)))
        else:
            if code in outlines:
                raise DuplicateKey(f"duplicate region {code}", path=path)
            outlines[code] = (str(props.get("province", "")), ring, None)
    return _assemble_regions(outlines, subs, path)


def load_regions(path) -> list:
    """Load region geometry; ``.geojson``/``.json`` files are read as GeoJSON."""
    path = Path(path)
    if path.suffix.lower() in (".geojson", ".json"):
        regions = _load_regions_geojson(path)
    else:
        regions = _load_regions_csv(path)
    if not any(r.has_subdistricts for r in regions):
        log.warning("%s: no sub-district geometry; sub-district analytics disabled", path)
    return regions


def write_regions_csv(path, regions: Sequence[RegionDef]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["code", "province", "subdistrict", "polygon"])
        for r in regions:
            w.writerow([r.code, r.province, "", ring_to_text(r.polygon)])
            for name, ring in r.subdistricts:
                w.writerow([r.code, r.province, name, ring_to_text(ring)])


def regions_to_geojson(regions: Sequence[RegionDef]) -> dict:
    feats = []
    for r in regions:
        rings = [(None, r.polygon)] + list(r.subdistricts)
        for name, ring in rings:
            props = {"postal_code": r.code, "province": r.province}
            if name:
                props["subdistrict"] = name
            feats.append({
                "type": "Feature",
                "properties": props,
                "geometry": {"type": "Polygon", "coordinates": [[[p.lon, p.lat] for p in ring]]},
            })
    return {"type": "FeatureCollection", "features": feats}


# -- point in polygon --------------------------------------------------------


def _ring_arrays(ring):
    xs = np.array([p.lon for p in ring], dtype=float)
    ys = np.array([p.lat for p in ring], dtype=float)
    return xs, ys


def points_in_ring(lat, lon, ring) -> np.ndarray:
    """Even-odd ray casting; points on an edge or vertex count as inside."""
    px = np.asarray(lon, dtype=float)
    py = np.asarray(lat, dtype=float)
    xs, ys = _ring_arrays(ring)
    inside = np.zeros(px.shape, dtype=bool)
    on_edge = np.zeros(px.shape, dtype=bool)
    bb = (px >= xs.min()) & (px <= xs.max()) & (py >= ys.min()) & (py <= ys.max())
    if not bb.any():
        return inside
    qx, qy = px[bb], py[bb]
    ins = np.zeros(qx.shape, dtype=bool)
    edge = np.zeros(qx.shape, dtype=bool)
    for k in range(len(xs) - 1):
        ax, ay, bx, by = xs[k], ys[k], xs[k + 1], ys[k + 1]
        cross = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
        edge |= (
            (np.abs(cross) <= 1e-12)
            & (qx >= min(ax, bx)) & (qx <= max(ax, bx))
            & (qy >= min(ay, by)) & (qy <= max(ay, by))
        )
        if ay == by:
            continue
        straddle = (ay > qy) != (by > qy)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = ax + (qy - ay) * (bx - ax) / (by - ay)
        ins ^= straddle & (qx < x_at)
    inside[bb] = ins | edge
    return inside


def point_in_ring(p: GeoPoint, ring) -> bool:
    return bool(points_in_ring(np.array([p.lat]), np.array([p.lon]), ring)[0])


def assign_regions(lat, lon, regions: Sequence[RegionDef], *, warn_overlap: bool = True) -> np.ndarray:
    """Index into ``regions`` of the first containing region, or -1."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    out = np.full(lat.shape, -1, dtype=np.int64)
    overlap = 0
    for i, r in enumerate(regions):
        hit = points_in_ring(lat, lon, r.polygon)
        overlap += int(np.count_nonzero(hit & (out >= 0)))
        out[hit & (out < 0)] = i
    if overlap and warn_overlap:
        warnings.warn(f"{overlap} point(s) fall in overlapping regions; first region in file order wins",
                      stacklevel=2)
    return out


def assign_subdistricts(lat, lon, region: RegionDef) -> np.ndarray:
    """Index into ``region.subdistricts`` (first match) or -1."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    out = np.full(lat.shape, -1, dtype=np.int64)
    for i, (_, ring) in enumerate(region.subdistricts):
        hit = points_in_ring(lat, lon, ring)
        out[hit & (out < 0)] = i
    return out


def assign_region(p: GeoPoint, regions: Sequence[RegionDef], *, with_subdistrict: bool = False):
    """Region code containing ``p`` (``None`` if none).

    With ``with_subdistrict`` a ``(code, subdistrict_name)`` pair is
    returned; the name is ``None`` when no sub-district contains the point.
    """
    idx = int(assign_regions(np.array([p.lat]), np.array([p.lon]), regions)[0])
    if idx < 0:
        return (None, None) if with_subdistrict else None
    region = regions[idx]
    if not with_subdistrict:
        return region.code
    s = int(assign_subdistricts(np.array([p.lat]), np.array([p.lon]), region)[0])
    return region.code, (region.subdistricts[s][0] if s >= 0 else None)


# -- air quality -------------------------------------------------------------


@total_ordering
class AirQuality(Enum):
    GREEN = "G"
    BLUE = "BL"
    YELLOW = "Y"
    RED = "R"
    BLACK = "B"
    MISSING = "-"

    @property
    def severity(self) -> Optional[int]:
        return _SEVERITY.get(self)

    def __lt__(self, other):
        if not isinstance(other, AirQuality):
            return NotImplemented
        if self.severity is None or other.severity is None:
            raise TypeError("MISSING air-quality readings are not ordered")
        return self.severity < other.severity

    @classmethod
    def parse(cls, text: str) -> "AirQuality":
        t = text.strip()
        if t in _MISSING_CELLS:
            return cls.MISSING
        key = t.upper()
        for member in cls:
            if key == member.value or key == member.name:
                return member
        raise ValueError(f"unknown air-quality class {text!r}")


_SEVERITY = {AirQuality.GREEN: 0, AirQuality.BLUE: 1, AirQuality.YELLOW: 2,
             AirQuality.RED: 3, AirQuality.BLACK: 4}
_MISSING_CELLS = {"", "-", "\u2013", "\u2014", "_", "NA", "na"}


class AirQualityTable:
    """Readings keyed by ``(region_code, date)``; absent keys read as MISSING."""

    def __init__(self, readings: Optional[dict] = None):
        self._data = dict(readings or {})

    def get(self, region_code: str, day: date) -> AirQuality:
        return self._data.get((region_code, day), AirQuality.MISSING)

    def __getitem__(self, key):
        return self.get(*key)

    def __len__(self):
        return len(self._data)

    def __contains__(self, key):
        return key in self._data

    def items(self):
        return self._data.items()


def parse_air_quality(text: str, path=None) -> AirQualityTable:
    data = {}
    reader = csv.reader(io.StringIO(text))
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if line == 1 and row[0].strip().lower() == "region_code":
            continue
        if len(row) == 2:
            row = row + [""]
        if len(row) != 3:
            raise FormatError(f"expected 3 fields, got {len(row)}", path=path, line=line)
        code = row[0].strip()
        if not code:
            raise FormatError("empty region code", path=path, line=line, column="region_code")
        try:
            day = date.fromisoformat(row[1].strip())
        except ValueError as e:
            raise FormatError(str(e), path=path, line=line, column="date") from None
        try:
            cls = AirQuality.parse(row[2])
        except ValueError as e:
            raise FormatError(str(e), path=path, line=line, column="class") from None
        if (code, day) in data:
            raise DuplicateKey(f"duplicate reading for ({code}, {day})", path=path, line=line)
        data[(code, day)] = cls
    return AirQualityTable(data)


def load_air_quality(path) -> AirQualityTable:
    path = Path(path)
    return parse_air_quality(path.read_text("utf-8"), path=path)


def write_air_quality(path, table: AirQualityTable) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region_code", "date", "class"])
        for (code, day), cls in sorted(table.items()):
            w.writerow([code, day.isoformat(), cls.value])
