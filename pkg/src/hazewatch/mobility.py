"""Per-user weekly mobility, reduction statistics, region analytics and meta-signals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import EmptyClass, MissingSubdistricts
from .ingest import AirQuality, AirQualityTable, RegionDef, assign_regions, assign_subdistricts
from .model import GeoPoint, GeoPost, LocalCalendar, distance_array, local_day, local_week
from .ruledsl import Taxonomy, TokenizedText
from .temporal import WeekClass, WeekClasses

PAIR_CLASSES = ("NO_HAZE", "HAZE", "SEVERE", "EVAC")
DEFAULT_BINS = (0.0, 50.0, 500.0, math.inf)
DEFAULT_SOURCE_RULES = (("browser", "web"), ("checkin", "foursquare"))


@dataclass(frozen=True)
class WeekStats:
    centroid: GeoPoint
    spread: float
    post_count: int


@dataclass(frozen=True)
class MobilityProfile:
    user_id: str
    weeks: Mapping  # week key -> WeekStats, only weeks with post_count > tau
    tau: int = 4


def _post_frame(posts: Sequence[GeoPost], cal: LocalCalendar) -> pd.DataFrame:
    tz = cal.tz
    rows_week = np.empty(len(posts), dtype=np.int64)
    for i, p in enumerate(posts):
        iso = p.timestamp.astimezone(tz).date().isocalendar()
        rows_week[i] = iso[0] * 100 + iso[1]
    return pd.DataFrame({
        "user": [p.user_id for p in posts],
        "week": rows_week,
        "lat": np.fromiter((p.location.lat for p in posts), float, len(posts)),
        "lon": np.fromiter((p.location.lon for p in posts), float, len(posts)),
    })


def build_profiles(posts: Sequence[GeoPost], tau: int = 4, cal: LocalCalendar = LocalCalendar(),
                   mode: str = "haversine") -> list:
    """Weekly centroid (mean lat, mean lon) and spread for every user.

    A week is kept only when the user posted strictly more than ``tau``
    times in it.  Spread is the mean distance from the centroid to each post.
    Profiles come back sorted by user id.
    """
    posts = list(posts)
    if not posts:
        return []
    df = _post_frame(posts, cal)
    g = df.groupby(["user", "week"], sort=True)
    agg = g.agg(n=("lat", "size"), clat=("lat", "mean"), clon=("lon", "mean"),
                lat0=("lat", "min"), lat1=("lat", "max"), lon0=("lon", "min"), lon1=("lon", "max"))
    agg = agg[agg["n"] > tau]
    # one shared location: centroid is that point exactly, so the spread is exactly 0
    same = (agg["lat0"] == agg["lat1"]) & (agg["lon0"] == agg["lon1"])
    agg.loc[same, "clat"] = agg.loc[same, "lat0"]
    agg.loc[same, "clon"] = agg.loc[same, "lon0"]
    users = sorted(set(df["user"]))
    if agg.empty:
        return [MobilityProfile(u, {}, tau) for u in users]
    merged = df.join(agg, on=["user", "week"], how="inner")
    merged["d"] = distance_array(merged["lat"].to_numpy(), merged["lon"].to_numpy(),
                                 merged["clat"].to_numpy(), merged["clon"].to_numpy(), mode)
    spread = merged.groupby(["user", "week"], sort=True)["d"].mean()
    agg = agg.join(spread.rename("spread"))
    by_user: dict = {u: {} for u in users}
    for (u, wk), row in zip(agg.index, agg.itertuples(index=False)):
        by_user[u][(int(wk) // 100, int(wk) % 100)] = WeekStats(
            GeoPoint(float(row.clat), float(row.clon)), float(row.spread), int(row.n))
    return [MobilityProfile(u, by_user[u], tau) for u in users]


# -- week pairs --------------------------------------------------------------


@dataclass(frozen=True)
class WeekPairSample:
    user_id: str
    w1: tuple
    w2: tuple
    w2_class: str
    distance: float
    rs: float  # math.inf when the baseline spread is zero and w2's is not


def relative_spread(s1: float, s2: float) -> float:
    if s1 == 0.0:
        return 1.0 if s2 == 0.0 else math.inf
    return s2 / s1


def _classes_of(week, wc: WeekClasses) -> list:
    c = wc.of(week)
    if c is None:
        return []
    out = {WeekClass.NO_HAZE: ["NO_HAZE"], WeekClass.HAZE: ["HAZE"],
           WeekClass.SEVERE_HAZE: ["SEVERE"]}[c]
    if wc.is_evacuation(week):
        out = out + ["EVAC"]
    return out


def pair_samples(profiles: Iterable[MobilityProfile], week_classes: WeekClasses, *,
                 pairing: str = "all", classes: Sequence[str] = PAIR_CLASSES,
                 mode: str = "haversine") -> list:
    """Baseline (no-haze) vs comparison week pairs for every user.

    ``pairing="all"`` takes every ordered pair with w1 a no-haze week and
    w2 != w1; ``"first-baseline"`` keeps only the earliest no-haze w1.
    """
    if pairing not in ("all", "first-baseline"):
        raise ValueError(f"unknown pairing {pairing!r}")
    wanted = set(classes)
    pending = []
    for prof in profiles:
        weeks = sorted(prof.weeks)
        baselines = [w for w in weeks if week_classes.of(w) is WeekClass.NO_HAZE]
        if pairing == "first-baseline":
            baselines = baselines[:1]
        for w1 in baselines:
            s1 = prof.weeks[w1]
            for w2 in weeks:
                if w2 == w1:
                    continue
                cls = [c for c in _classes_of(w2, week_classes) if c in wanted]
                if cls:
                    pending.append((prof.user_id, w1, w2, cls, s1, prof.weeks[w2]))
    if not pending:
        return []
    c1 = np.array([(a.centroid.lat, a.centroid.lon) for *_, a, _ in pending])
    c2 = np.array([(b.centroid.lat, b.centroid.lon) for *_, b in pending])
    dist = distance_array(c1[:, 0], c1[:, 1], c2[:, 0], c2[:, 1], mode).tolist()
    out = []
    for (user, w1, w2, cls, s1, s2), d in zip(pending, dist):
        rs = relative_spread(s1.spread, s2.spread)
        for c in cls:
            out.append(WeekPairSample(user, w1, w2, c, d, rs))
    return out


@dataclass(frozen=True)
class EmpiricalCDF:
    values: np.ndarray  # sorted samples

    def __call__(self, x) -> np.ndarray:
        return np.searchsorted(self.values, np.asarray(x, float), side="right") / len(self.values)

    def steps(self):
        """Distinct values with the CDF evaluated at each."""
        u, counts = np.unique(self.values, return_counts=True)
        return u, np.cumsum(counts) / len(self.values)


def distance_cdf(samples: Iterable[WeekPairSample], w2_class: str) -> EmpiricalCDF:
    vals = np.sort(np.array([s.distance for s in samples if s.w2_class == w2_class], dtype=float))
    if len(vals) == 0:
        raise EmptyClass(f"no week pairs for class {w2_class}")
    return EmpiricalCDF(vals)


@dataclass(frozen=True)
class ReductionCell:
    w2_class: str
    bin_label: str
    bin_lo: float
    bin_hi: float
    n_pairs: int
    n_reducers: int
    per_pair: float
    n_users: int
    per_user_mean: float


def _bin_label(lo: float, hi: float) -> str:
    return f"[{lo:g},{'inf' if math.isinf(hi) else f'{hi:g}'})"


def _cell(cls, label, lo, hi, group, threshold) -> Optional[ReductionCell]:
    if not group:
        return None
    red = [s.rs < threshold for s in group]
    per_user: dict = {}
    for s, r in zip(group, red):
        per_user.setdefault(s.user_id, []).append(r)
    user_means = [sum(v) / len(v) for v in per_user.values()]
    return ReductionCell(cls, label, lo, hi, len(group), sum(red), sum(red) / len(group),
                         len(per_user), sum(user_means) / len(user_means))


def reduction_rate(samples: Sequence[WeekPairSample], rs_threshold: float = 1 / 3,
                   distance_bins: Sequence[float] = DEFAULT_BINS, *, include_all: bool = True) -> list:
    """Share of pairs with relative spread below ``rs_threshold``.

    Cells are (w2 class, distance bin); empty cells are absent.  An
    infinite relative spread never counts as a reduction.  With
    ``include_all`` an extra cell labelled ``all`` spans every distance.
    Both the per-pair proportion and the mean of per-user proportions are
    reported.
    """
    bins = [float(b) for b in distance_bins]
    if len(bins) < 2 or any(b <= a for a, b in zip(bins[:-1], bins[1:])):
        raise ValueError("distance bins must be increasing")
    cells = []
    present = {s.w2_class for s in samples}
    classes = [c for c in PAIR_CLASSES if c in present] + sorted(present - set(PAIR_CLASSES))
    for cls in classes:
        group = [s for s in samples if s.w2_class == cls]
        for lo, hi in zip(bins[:-1], bins[1:]):
            c = _cell(cls, _bin_label(lo, hi), lo, hi,
                      [s for s in group if lo <= s.distance < hi], rs_threshold)
            if c is not None:
                cells.append(c)
        if include_all:
            c = _cell(cls, "all", bins[0], math.inf, group, rs_threshold)
            if c is not None:
                cells.append(c)
    return cells


# -- regions -----------------------------------------------------------------


def _assign(posts: Sequence[GeoPost], regions: Sequence[RegionDef], region_index=None) -> np.ndarray:
    if region_index is not None:
        return np.asarray(region_index)
    lat = np.fromiter((p.location.lat for p in posts), float, len(posts))
    lon = np.fromiter((p.location.lon for p in posts), float, len(posts))
    return assign_regions(lat, lon, regions)


def home_regions(posts: Sequence[GeoPost], regions: Sequence[RegionDef], *, region_index=None) -> dict:
    """user id -> home region code (or ``None``) for every user in ``posts``.

    The home region holds the plurality of a user's posts; ties go to the
    tied region the user posted in first.
    """
    posts = list(posts)
    idx = _assign(posts, regions, region_index)
    best: dict = {}
    stats: dict = {}
    for p, r in zip(posts, idx.tolist()):
        best.setdefault(p.user_id, None)
        if r < 0:
            continue
        key = (p.user_id, r)
        t = p.timestamp.timestamp()
        if key in stats:
            n, first = stats[key]
            stats[key] = (n + 1, min(first, t))
        else:
            stats[key] = (1, t)
    winner: dict = {}
    for (u, r), (n, first) in stats.items():
        cur = winner.get(u)
        if cur is None or n > cur[0] or (n == cur[0] and (first, r) < (cur[1], cur[2])):
            winner[u] = (n, first, r)
    for u, (_, _, r) in winner.items():
        best[u] = regions[r].code
    return best


def home_region(user_posts: Sequence[GeoPost], regions: Sequence[RegionDef]) -> Optional[str]:
    hr = home_regions(list(user_posts), regions)
    codes = set(hr.values())
    if len(hr) > 1:
        raise ValueError("home_region expects the posts of a single user")
    return next(iter(codes)) if codes else None


def _day_span(days: Sequence[date], day_range) -> list:
    if day_range is None:
        if not days:
            return []
        first, last = min(days), max(days)
    else:
        first, last = day_range
    out = []
    d = first
    while d <= last:
        out.append(d)
        d += timedelta(days=1)
    return out


@dataclass(frozen=True)
class DiversityRow:
    day: date
    inside: int
    outside: int
    air_quality: AirQuality = AirQuality.MISSING

    @property
    def total(self) -> int:
        return self.inside + self.outside


def region_diversity(cohort_posts: Sequence[GeoPost], regions: Sequence[RegionDef], *,
                     home_province: str, day_range=None, cal: LocalCalendar = LocalCalendar(),
                     air_quality: Optional[AirQualityTable] = None, home_code: Optional[str] = None,
                     region_index=None) -> list:
    """Distinct regions with >= 1 cohort post per day, split by province."""
    posts = list(cohort_posts)
    idx = _assign(posts, regions, region_index)
    days = [local_day(p.timestamp, cal) for p in posts]
    visited: dict = {}
    for d, r in zip(days, idx.tolist()):
        if r >= 0:
            visited.setdefault(d, set()).add(r)
    rows = []
    for d in _day_span(days, day_range):
        seen = visited.get(d, set())
        inside = sum(1 for r in seen if regions[r].province == home_province)
        aq = air_quality.get(home_code, d) if (air_quality is not None and home_code) else AirQuality.MISSING
        rows.append(DiversityRow(d, inside, len(seen) - inside, aq))
    return rows


@dataclass(frozen=True)
class RegionVisitRow:
    day: date
    region: str
    subdistricts_visited: int
    air_quality: AirQuality = AirQuality.MISSING


def region_subdistrict_visits(cohort_posts: Sequence[GeoPost], regions: Sequence[RegionDef], *,
                              day_range=None, cal: LocalCalendar = LocalCalendar(),
                              air_quality: Optional[AirQualityTable] = None, region_index=None) -> list:
    """Per day and region: distinct sub-districts with cohort posts."""
    posts = list(cohort_posts)
    idx = _assign(posts, regions, region_index)
    days = [local_day(p.timestamp, cal) for p in posts]
    lat = np.fromiter((p.location.lat for p in posts), float, len(posts))
    lon = np.fromiter((p.location.lon for p in posts), float, len(posts))
    sub = np.full(len(posts), -1, np.int64)
    for r, region in enumerate(regions):
        sel = np.nonzero(idx == r)[0]
        if len(sel) and region.has_subdistricts:
            sub[sel] = assign_subdistricts(lat[sel], lon[sel], region)
    visited: dict = {}
    for d, r, s in zip(days, idx.tolist(), sub.tolist()):
        if r >= 0 and s >= 0:
            visited.setdefault((d, r), set()).add(s)
    rows = []
    for d in _day_span(days, day_range):
        for r, region in enumerate(regions):
            if not region.has_subdistricts:
                continue
            aq = air_quality.get(region.code, d) if air_quality is not None else AirQuality.MISSING
            rows.append(RegionVisitRow(d, region.code, len(visited.get((d, r), ())), aq))
    return rows


BUCKETS = ("1", "2", "3", "4+")


def subdistrict_visit_buckets(cohort_posts: Sequence[GeoPost], region: RegionDef, *, day_range=None,
                              cal: LocalCalendar = LocalCalendar()) -> dict:
    """day -> {"1","2","3","4+"} -> number of users visiting that many sub-districts.

    Only posts inside one of ``region``'s sub-districts count; users with
    none on a day are left out of that day.
    """
    if not region.has_subdistricts:
        raise MissingSubdistricts(f"region {region.code} has no sub-district geometry")
    posts = list(cohort_posts)
    lat = np.fromiter((p.location.lat for p in posts), float, len(posts))
    lon = np.fromiter((p.location.lon for p in posts), float, len(posts))
    sub = assign_subdistricts(lat, lon, region)
    days = [local_day(p.timestamp, cal) for p in posts]
    per: dict = {}
    for p, d, s in zip(posts, days, sub.tolist()):
        if s >= 0:
            per.setdefault(d, {}).setdefault(p.user_id, set()).add(s)
    out = {}
    for d in _day_span(days, day_range):
        b = dict.fromkeys(BUCKETS, 0)
        for subs in per.get(d, {}).values():
            k = len(subs)
            b[BUCKETS[min(k, 4) - 1]] += 1
        out[d] = b
    return out


# -- meta-signals ------------------------------------------------------------


@dataclass(frozen=True)
class MetaSignalSeries:
    days: tuple
    total: np.ndarray
    counts: Mapping[str, np.ndarray] = field(default_factory=dict)


def meta_signals(cohort_posts: Sequence[GeoPost], keywords: Sequence[Taxonomy], *,
                 source_rules: Sequence[tuple] = DEFAULT_SOURCE_RULES, day_range=None,
                 cal: LocalCalendar = LocalCalendar()) -> MetaSignalSeries:
    """Daily counts of keyword mentions and client-source classes.

    Keyword series use the rule matcher; a source series counts posts whose
    source label contains the rule's substring, case-insensitively.
    """
    posts = list(cohort_posts)
    days = [local_day(p.timestamp, cal) for p in posts]
    axis = _day_span(days, day_range)
    pos = {d: i for i, d in enumerate(axis)}
    names = [k.name for k in keywords] + [name for name, _ in source_rules]
    counts = {n: np.zeros(len(axis), np.int64) for n in names}
    total = np.zeros(len(axis), np.int64)
    needles = [(name, sub.lower()) for name, sub in source_rules]
    for p, d in zip(posts, days):
        i = pos.get(d)
        if i is None:
            continue
        total[i] += 1
        tt = TokenizedText(p.text)
        for k in keywords:
            if k.matches(tt):
                counts[k.name][i] += 1
        src = p.source.lower()
        for name, needle in needles:
            if needle in src:
                counts[name][i] += 1
    return MetaSignalSeries(tuple(axis), total, counts)


def weeks_of(posts: Iterable[GeoPost], cal: LocalCalendar = LocalCalendar()) -> set:
    return {local_week(p.timestamp, cal) for p in posts}
