"""Daily/weekly bucketing, hotspot-topic correlation and week classes."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import Executor
from dataclasses import dataclass, field
from datetime import date, timedelta
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError, DegenerateSeries, EmptyInput
from .model import (
    FireHotspot,
    GeoPost,
    LocalCalendar,
    format_week,
    local_day,
    week_of,
    week_range,
)

# ISO weeks of 2014 with incomplete post collection (half of January,
# April 16-30).
DATA_GAP_WEEKS = frozenset([(2014, w) for w in (1, 2, 3, 4, 5, 16, 17, 18)])


def _frozen(a) -> np.ndarray:
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class WeeklySeries:
    """Counts on a shared, gap-free period axis.

    ``periods`` holds ``(iso_year, week)`` keys for weekly series and
    :class:`datetime.date` values for daily ones.
    """

    periods: tuple
    hotspot_count: np.ndarray
    topic_counts: Mapping[str, np.ndarray]
    total_posts: np.ndarray
    granularity: str = "week"

    def __post_init__(self):
        n = len(self.periods)
        object.__setattr__(self, "hotspot_count", _frozen(self.hotspot_count))
        object.__setattr__(self, "total_posts", _frozen(self.total_posts))
        object.__setattr__(self, "topic_counts", {k: _frozen(v) for k, v in self.topic_counts.items()})
        for name, arr in [("hotspots", self.hotspot_count), ("total", self.total_posts),
                          *self.topic_counts.items()]:
            if len(arr) != n:
                raise ValueError(f"series {name!r} has {len(arr)} entries for {n} periods")

    @property
    def weeks(self) -> tuple:
        return self.periods

    @property
    def topics(self) -> list:
        return list(self.topic_counts)

    def index(self, period) -> int:
        return self.periods.index(period)

    def hotspots_by_period(self) -> dict:
        return dict(zip(self.periods, self.hotspot_count.tolist()))


def _period_axis(first, last, granularity):
    if granularity == "week":
        return week_range(first, last)
    out = []
    d = first
    while d <= last:
        out.append(d)
        d += timedelta(days=1)
    return out


def build_weekly_series(
    hotspots: Iterable[FireHotspot],
    posts: Iterable[GeoPost],
    classifications: Iterable[Iterable[str]],
    cal: LocalCalendar = LocalCalendar(),
    *,
    topics: Optional[Sequence[str]] = None,
    granularity: str = "week",
    span: Optional[tuple] = None,
) -> WeeklySeries:
    """Exact per-period counts.

    ``classifications`` runs parallel to ``posts``; a post adds one to every
    topic it matched and one to the total.  ``span`` pins the axis to
    ``(first, last)`` periods; events outside it are ignored.
    """
    if granularity not in ("week", "day"):
        raise ValueError(f"granularity must be 'week' or 'day', not {granularity!r}")
    key = week_of if granularity == "week" else (lambda d: d)

    hot_keys = [key(h.date) for h in hotspots]
    post_keys = []
    post_topics = []
    for p, topics_of_post in zip(posts, classifications):
        post_keys.append(key(local_day(p.timestamp, cal)))
        post_topics.append(topics_of_post)
    if not hot_keys and not post_keys:
        raise EmptyInput("no hotspots and no posts to bucket")

    if topics is None:
        topics = sorted({t for ts in post_topics for t in ts})
    topics = list(topics)

    if span is None:
        allk = hot_keys + post_keys
        span = (min(allk), max(allk))
    axis = _period_axis(span[0], span[1], granularity)
    pos = {k: i for i, k in enumerate(axis)}
    n = len(axis)
    hot = np.zeros(n, dtype=np.int64)
    total = np.zeros(n, dtype=np.int64)
    tc = {t: np.zeros(n, dtype=np.int64) for t in topics}

    for k in hot_keys:
        i = pos.get(k)
        if i is not None:
            hot[i] += 1
    for k, ts in zip(post_keys, post_topics):
        i = pos.get(k)
        if i is None:
            continue
        total[i] += 1
        for t in ts:
            if t in tc:
                tc[t][i] += 1
    return WeeklySeries(tuple(axis), hot, tc, total, granularity)


def pearson(x, y) -> float:
    """Product-moment correlation; raises :class:`DegenerateSeries` for constants."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError(f"series must be 1-d and of equal length ({x.shape} vs {y.shape})")
    if len(x) < 2:
        raise DegenerateSeries("need at least two observations")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("series contain non-finite values")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or np.all(x == x[0]):
        raise DegenerateSeries("first series is constant")
    if syy == 0.0 or np.all(y == y[0]):
        raise DegenerateSeries("second series is constant")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class CorrelationCell:
    area: str
    taxonomy: str
    r: Optional[float]
    n_weeks: int
    error: Optional[str] = None


def correlate_series(series: WeeklySeries, taxonomy: str, area: str = "all",
                     exclude: Iterable = ()) -> CorrelationCell:
    exclude = set(exclude)
    keep = np.array([p not in exclude for p in series.periods], dtype=bool)
    x = series.hotspot_count[keep]
    y = series.topic_counts[taxonomy][keep]
    try:
        r = pearson(x, y)
    except DegenerateSeries as e:
        return CorrelationCell(area, taxonomy, None, int(keep.sum()), f"DegenerateSeries: {e}")
    return CorrelationCell(area, taxonomy, r, int(keep.sum()))


def correlate_all(
    series_by_area: Mapping[str, WeeklySeries],
    *,
    exclude: Iterable = (),
    taxonomies: Optional[Sequence[str]] = None,
    executor: Optional[Executor] = None,
) -> list:
    """One coefficient per ``(area, taxonomy)``; degenerate cells carry an error."""
    exclude = frozenset(exclude)
    jobs = []
    for area, s in series_by_area.items():
        for t in (taxonomies if taxonomies is not None else s.topics):
            jobs.append((s, t, area))
    if executor is None:
        return [correlate_series(s, t, a, exclude) for s, t, a in jobs]
    futures = [executor.submit(correlate_series, s, t, a, exclude) for s, t, a in jobs]
    return [f.result() for f in futures]


# -- week classes ------------------------------------------------------------


class WeekClass(str, Enum):
    NO_HAZE = "NO_HAZE"
    HAZE = "HAZE"
    SEVERE_HAZE = "SEVERE_HAZE"


@dataclass(frozen=True)
class WeekClassConfig:
    low: int = 100
    high: int = 400
    excluded_weeks: frozenset = frozenset()
    evacuation_weeks: frozenset = frozenset({(2014, 11)})

    def __post_init__(self):
        if self.low >= self.high:
            raise ConfigError(f"week-class bounds need low < high (got {self.low}, {self.high})")
        object.__setattr__(self, "excluded_weeks", frozenset(self.excluded_weeks))
        object.__setattr__(self, "evacuation_weeks", frozenset(self.evacuation_weeks))


@dataclass(frozen=True)
class WeekClasses:
    classes: Mapping  # week -> WeekClass, excluded weeks absent
    evacuation: frozenset
    excluded: frozenset
    counts: Mapping = field(default_factory=dict)
    config: WeekClassConfig = WeekClassConfig()

    def of(self, week) -> Optional[WeekClass]:
        return self.classes.get(week)

    def weeks_in(self, cls: WeekClass) -> list:
        return [w for w, c in self.classes.items() if c is cls]

    def is_evacuation(self, week) -> bool:
        return week in self.evacuation


def class_of_count(count: int, low: int = 100, high: int = 400) -> WeekClass:
    if count < low:
        return WeekClass.NO_HAZE
    if count > high:
        return WeekClass.SEVERE_HAZE
    return WeekClass.HAZE


def classify_weeks(series: WeeklySeries, config: WeekClassConfig = WeekClassConfig()) -> WeekClasses:
    """Classify every non-excluded week by its hotspot count.

    Configured evacuation weeks are flagged only when they classify as
    severe haze; others are ignored with a warning.
    """
    if series.granularity != "week":
        raise ValueError("week classes need a weekly series")
    classes = {}
    counts = {}
    for week, count in zip(series.periods, series.hotspot_count.tolist()):
        counts[week] = count
        if week in config.excluded_weeks:
            continue
        classes[week] = class_of_count(count, config.low, config.high)
    evac = set()
    for w in sorted(config.evacuation_weeks):
        if classes.get(w) is WeekClass.SEVERE_HAZE:
            evac.add(w)
        elif w in counts:
            warnings.warn(f"evacuation week {format_week(w)} is not a severe-haze week; not flagged",
                          stacklevel=2)
    return WeekClasses(classes, frozenset(evac), frozenset(config.excluded_weeks), counts, config)


def daily_axis(first: date, last: date) -> list:
    return _period_axis(first, last, "day")
