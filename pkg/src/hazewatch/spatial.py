"""Same-day nearest-neighbour joins between posts and hotspots.

All joins are exact: a k-d tree proposes candidates (on unit-sphere
chords for haversine, which are monotone in arc length) and the final
choice is made on recomputed distances, ties going to the smallest id.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, EmptyDistribution
from .model import (
    FireHotspot,
    GeoPost,
    HotspotColumns,
    LocalCalendar,
    PostColumns,
    distance_array,
    local_day,
)

_REL_SLACK = 1e-9
_ABS_SLACK = 1e-12
# distance-matrix budget (elements) for one day in the null model
_MATRIX_LIMIT = 8_000_000
_CHUNK_ELEMENTS = 4_000_000


def _xyz(lat, lon) -> np.ndarray:
    p = np.radians(lat)
    lam = np.radians(lon)
    c = np.cos(p)
    return np.column_stack([c * np.cos(lam), c * np.sin(lam), np.sin(p)])


def _tree_coords(lat, lon, mode):
    if mode == "haversine":
        return _xyz(lat, lon)
    return np.column_stack([np.asarray(lat, float), np.asarray(lon, float)])


class _PointSet:
    """Points of one day, ordered by id, with a k-d tree."""

    __slots__ = ("ids", "lat", "lon", "orig", "tree", "mode")

    def __init__(self, ids, lat, lon, orig, mode):
        order = sorted(range(len(ids)), key=ids.__getitem__)
        self.ids = [ids[i] for i in order]
        self.lat = np.asarray(lat, float)[order]
        self.lon = np.asarray(lon, float)[order]
        self.orig = np.asarray(orig)[order]
        self.mode = mode
        self.tree = cKDTree(_tree_coords(self.lat, self.lon, mode))

    def __len__(self):
        return len(self.ids)

    def nearest(self, qlat, qlon):
        """Positions (into this set) and distances of the exact nearest points."""
        qlat = np.asarray(qlat, float)
        qlon = np.asarray(qlon, float)
        m = len(self.ids)
        q = _tree_coords(qlat, qlon, self.mode)
        k = min(4, m)
        d, idx = self.tree.query(q, k=k)
        if k == 1:
            d = d[:, None]
            idx = idx[:, None]
        limit = d[:, 0] * (1.0 + _REL_SLACK) + _ABS_SLACK
        dist = distance_array(qlat[:, None], qlon[:, None], self.lat[idx], self.lon[idx], self.mode)
        within = d <= limit[:, None]
        dist = np.where(within, dist, np.inf)
        best = _lexmin(dist, idx)
        pos = idx[np.arange(len(qlat)), best]
        out_d = dist[np.arange(len(qlat)), best]
        # rows whose k-th candidate is still a possible tie need a ball query
        if k < m:
            spill = np.nonzero(within[:, -1])[0]
            for r in spill:
                cand = np.array(sorted(self.tree.query_ball_point(q[r], limit[r])), dtype=np.int64)
                cd = distance_array(qlat[r], qlon[r], self.lat[cand], self.lon[cand], self.mode)
                j = int(np.argmin(cd))  # cand is id-ordered, argmin keeps the first tie
                pos[r] = cand[j]
                out_d[r] = cd[j]
        return pos, out_d


def _lexmin(dist: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Column of the smallest distance per row, ties to the smallest position."""
    mins = dist.min(axis=1)
    key = np.where(dist == mins[:, None], idx, np.iinfo(np.int64).max)
    return key.argmin(axis=1)


class SpatialDayIndex:
    """Exact nearest-neighbour structure per calendar day.

    ``day`` values are proleptic ordinals of local dates.
    """

    def __init__(self, ids: Sequence[str], lat, lon, day, mode: str = "haversine"):
        self.mode = mode
        lat = np.asarray(lat, float)
        lon = np.asarray(lon, float)
        day = np.asarray(day, np.int64)
        self._sets = {}
        if len(ids) == 0:
            return
        order = np.argsort(day, kind="stable")
        sd = day[order]
        cuts = np.nonzero(np.diff(sd))[0] + 1
        for grp in np.split(order, cuts):
            d = int(day[grp[0]])
            self._sets[d] = _PointSet([ids[i] for i in grp], lat[grp], lon[grp], grp, mode)

    @classmethod
    def of_hotspots(cls, hotspots, mode="haversine") -> "SpatialDayIndex":
        cols = hotspots if isinstance(hotspots, HotspotColumns) else HotspotColumns.from_hotspots(hotspots)
        return cls(cols.ids, cols.lat, cols.lon, cols.day, mode)

    @classmethod
    def of_posts(cls, posts, cal: LocalCalendar = LocalCalendar(), mode="haversine") -> "SpatialDayIndex":
        cols = posts if isinstance(posts, PostColumns) else PostColumns.from_posts(posts, cal)
        return cls(cols.ids, cols.lat, cols.lon, cols.day, mode)

    def days(self) -> list:
        return sorted(self._sets)

    def size(self, day: int) -> int:
        s = self._sets.get(day)
        return len(s) if s is not None else 0

    def query(self, day, lat, lon):
        """Nearest point per query on ``day``.

        Returns ``(orig_index, distance)`` arrays; ``orig_index`` refers to the
        construction order and is -1 (distance NaN) when the day is empty.
        """
        lat = np.atleast_1d(np.asarray(lat, float))
        lon = np.atleast_1d(np.asarray(lon, float))
        s = self._sets.get(int(day))
        if s is None or len(lat) == 0:
            return np.full(len(lat), -1, np.int64), np.full(len(lat), np.nan)
        pos, dist = s.nearest(lat, lon)
        return s.orig[pos].astype(np.int64), dist

    def query_many(self, lat, lon, day):
        """Vectorised same-day query for many points with their own days."""
        lat = np.asarray(lat, float)
        lon = np.asarray(lon, float)
        day = np.asarray(day, np.int64)
        out_i = np.full(len(lat), -1, np.int64)
        out_d = np.full(len(lat), np.nan)
        if len(lat) == 0:
            return out_i, out_d
        order = np.argsort(day, kind="stable")
        cuts = np.nonzero(np.diff(day[order]))[0] + 1
        for grp in np.split(order, cuts):
            i, d = self.query(int(day[grp[0]]), lat[grp], lon[grp])
            out_i[grp] = i
            out_d[grp] = d
        return out_i, out_d

    def id_of(self, day: int, orig_index: int) -> str:
        s = self._sets[day]
        return s.ids[int(np.nonzero(s.orig == orig_index)[0][0])]


def nearest_hotspot(post: GeoPost, index: SpatialDayIndex, cal: LocalCalendar = LocalCalendar(),
                    hotspot_ids: Optional[Sequence[str]] = None):
    """``(hotspot_id, km)`` of the nearest same-day hotspot, or ``None``."""
    day = local_day(post.timestamp, cal).toordinal()
    i, d = index.query(day, [post.location.lat], [post.location.lon])
    if i[0] < 0:
        return None
    hid = hotspot_ids[i[0]] if hotspot_ids is not None else index.id_of(day, int(i[0]))
    return hid, float(d[0])


def nearest_join(posts: PostColumns, hotspots: HotspotColumns, mode: str = "haversine"):
    """Indexed join: for every post, its nearest same-day hotspot.

    Returns ``(hotspot_index, distance)`` arrays; -1 / NaN when none.
    """
    index = SpatialDayIndex(hotspots.ids, hotspots.lat, hotspots.lon, hotspots.day, mode)
    return index.query_many(posts.lat, posts.lon, posts.day)


# -- popularity --------------------------------------------------------------


@dataclass(frozen=True)
class PopularityTable:
    hotspot_ids: tuple
    counts: np.ndarray
    unmatched_posts: int = 0

    def __getitem__(self, hotspot_id: str) -> int:
        return int(self.counts[self.hotspot_ids.index(hotspot_id)])

    def as_dict(self) -> dict:
        return dict(zip(self.hotspot_ids, self.counts.tolist()))

    @property
    def referenced(self) -> list:
        """Ids of hotspots with popularity >= 1."""
        return [h for h, c in zip(self.hotspot_ids, self.counts.tolist()) if c >= 1]

    def frequency(self) -> dict:
        """popularity value -> number of hotspots with it, over referenced hotspots."""
        vals, cnt = np.unique(self.counts[self.counts >= 1], return_counts=True)
        return dict(zip(vals.tolist(), cnt.tolist()))


def popularity(posts, hotspots, cal: LocalCalendar = LocalCalendar(), mode: str = "haversine") -> PopularityTable:
    """Each post adds one to its nearest same-day hotspot."""
    pc = posts if isinstance(posts, PostColumns) else PostColumns.from_posts(posts, cal)
    hc = hotspots if isinstance(hotspots, HotspotColumns) else HotspotColumns.from_hotspots(hotspots)
    idx, _ = nearest_join(pc, hc, mode)
    hit = idx[idx >= 0]
    counts = np.bincount(hit, minlength=len(hc)).astype(np.int64)
    return PopularityTable(tuple(hc.ids), counts, int(np.count_nonzero(idx < 0)))


# -- distance distributions --------------------------------------------------


def _summary(samples: np.ndarray) -> tuple:
    """(mean, median, stdev) of a contiguous 1-d sample; stdev uses n-1."""
    n = samples.shape[0]
    mean = float(np.mean(samples))
    median = float(np.median(samples))
    stdev = float(np.std(samples, ddof=1)) if n > 1 else 0.0
    return mean, median, stdev


@dataclass(frozen=True)
class DistanceDistribution:
    samples: np.ndarray
    bin_width: float = 5.0
    excluded: int = 0
    label: str = "ALL"
    direction: str = "post_to_hotspot"

    def __post_init__(self):
        s = np.ascontiguousarray(self.samples, dtype=float)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if self.bin_width <= 0:
            raise ConfigError("bin width must be positive")

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def mean(self) -> float:
        return _summary(self.samples)[0]

    @property
    def median(self) -> float:
        return _summary(self.samples)[1]

    @property
    def stdev(self) -> float:
        return _summary(self.samples)[2]

    def histogram(self):
        """``(edges, counts, densities)``; densities integrate to one."""
        w = self.bin_width
        top = float(self.samples.max()) if self.n else 0.0
        nbins = int(math.floor(top / w)) + 1
        edges = np.arange(nbins + 1, dtype=float) * w
        bins = np.minimum(np.floor(self.samples / w).astype(np.int64), nbins - 1)
        counts = np.bincount(bins, minlength=nbins)
        dens = counts / (self.n * w) if self.n else np.zeros(nbins)
        return edges, counts, dens


def _topic_cols(posts, cal):
    return posts if isinstance(posts, PostColumns) else PostColumns.from_posts(list(posts), cal)


def tweet_to_hotspot_distribution(posts, hotspots, cal: LocalCalendar = LocalCalendar(), *,
                                  label: str = "ALL", mode: str = "haversine",
                                  bin_width: float = 5.0) -> DistanceDistribution:
    """Distance from every post to its nearest same-day hotspot.

    Posts on days without hotspots are left out and counted in ``excluded``.
    """
    pc = _topic_cols(posts, cal)
    hc = hotspots if isinstance(hotspots, HotspotColumns) else HotspotColumns.from_hotspots(hotspots)
    idx, dist = nearest_join(pc, hc, mode)
    ok = idx >= 0
    if not ok.any():
        raise EmptyDistribution(f"{label}: no post has a same-day hotspot")
    return DistanceDistribution(dist[ok], bin_width, int((~ok).sum()), label, "post_to_hotspot")


def hotspot_to_tweet_distribution(posts, hotspots, cal: LocalCalendar = LocalCalendar(), *,
                                  label: str = "ALL", mode: str = "haversine",
                                  bin_width: float = 5.0) -> DistanceDistribution:
    """Distance from every hotspot to the nearest same-day post of ``posts``."""
    pc = _topic_cols(posts, cal)
    hc = hotspots if isinstance(hotspots, HotspotColumns) else HotspotColumns.from_hotspots(hotspots)
    index = SpatialDayIndex(pc.ids, pc.lat, pc.lon, pc.day, mode)
    idx, dist = index.query_many(hc.lat, hc.lon, hc.day)
    ok = idx >= 0
    if not ok.any():
        raise EmptyDistribution(f"{label}: no hotspot has a same-day post")
    return DistanceDistribution(dist[ok], bin_width, int((~ok).sum()), label, "hotspot_to_post")


# -- null model --------------------------------------------------------------


def day_stream(seed: int, day: int) -> np.random.Generator:
    """Independent generator for one day, so work order never matters."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(int(day),))))


def sample_without_replacement(rng: np.random.Generator, population: int, k: int, size: int) -> np.ndarray:
    """``size`` independent uniform k-subsets of ``range(population)``."""
    if not 0 <= k <= population:
        raise ValueError(f"cannot draw {k} of {population}")
    if k == population:
        return np.broadcast_to(np.arange(population), (size, population))
    keys = rng.random((size, population))
    if k == 0:
        return np.empty((size, 0), dtype=np.int64)
    return np.argpartition(keys, k - 1, axis=1)[:, :k]


@dataclass
class _DayWork:
    day: int
    hlat: np.ndarray
    hlon: np.ndarray
    plat: np.ndarray
    plon: np.ndarray
    topic_cols: np.ndarray


def _day_null(work: _DayWork, iterations: int, seed: int, mode: str):
    """Real and null hotspot->nearest-post minima for one day."""
    m = len(work.hlat)
    N = len(work.plat)
    n = len(work.topic_cols)
    rng = day_stream(seed, work.day)
    out = np.empty((iterations, m))
    if m * N <= _MATRIX_LIMIT:
        D = distance_array(work.hlat[:, None], work.hlon[:, None], work.plat[None, :], work.plon[None, :], mode)
        real = D[:, work.topic_cols].min(axis=1)
        chunk = max(1, _CHUNK_ELEMENTS // max(1, m * n))
        done = 0
        while done < iterations:
            c = min(chunk, iterations - done)
            cols = sample_without_replacement(rng, N, n, c)
            # (m, c, n) gather, minimum over the sampled posts
            out[done:done + c] = D[:, cols].min(axis=2).T
            done += c
        return real, out
    tree_real = _PointSet([str(i) for i in range(n)], work.plat[work.topic_cols],
                          work.plon[work.topic_cols], np.arange(n), mode)
    real = tree_real.nearest(work.hlat, work.hlon)[1]
    for it in range(iterations):
        cols = sample_without_replacement(rng, N, n, 1)[0]
        ps = _PointSet([str(i) for i in range(n)], work.plat[cols], work.plon[cols], np.arange(n), mode)
        out[it] = ps.nearest(work.hlat, work.hlon)[1]
    return real, out


@dataclass(frozen=True)
class NullModelResult:
    """Real vs. day-matched random-sample distances from hotspots to posts.

    ``per_iteration`` has columns mean, median, stdev.  Two spreads are
    reported: ``across_iteration_stdev`` (of per-iteration means) and
    ``pooled_stdev`` (over all null samples of all iterations).
    """

    label: str
    iterations: int
    rng_seed: int
    real_mean: float
    real_median: float
    real_stdev: float
    n_samples: int
    excluded_hotspots: int
    per_iteration: np.ndarray = field(repr=False)

    @property
    def null_mean(self) -> float:
        return float(np.mean(self.per_iteration[:, 0]))

    @property
    def null_median(self) -> float:
        return float(np.mean(self.per_iteration[:, 1]))

    @property
    def null_stdev(self) -> float:
        """Mean of the per-iteration sample stdevs."""
        return float(np.mean(self.per_iteration[:, 2]))

    @property
    def across_iteration_stdev(self) -> float:
        return float(np.std(self.per_iteration[:, 0], ddof=1)) if self.iterations > 1 else 0.0

    @property
    def pooled_stdev(self) -> float:
        n = self.n_samples
        means = self.per_iteration[:, 0]
        sds = self.per_iteration[:, 2]
        total = n * self.iterations
        if total < 2:
            return 0.0
        grand = float(np.mean(means))
        ss = float(np.sum((n - 1) * sds ** 2) + np.sum(n * (means - grand) ** 2))
        return math.sqrt(ss / (total - 1))

    def z_score(self) -> float:
        s = self.across_iteration_stdev
        return (self.real_mean - self.null_mean) / s if s > 0 else 0.0


def null_model(topic_mask, posts, hotspots, cal: LocalCalendar = LocalCalendar(), *,
               iterations: int = 1000, seed: int = 0, label: str = "topic",
               mode: str = "haversine", executor: Optional[Executor] = None) -> NullModelResult:
    """Day-matched random-sample null model for hotspot->post distances.

    On each day with hotspots and ``n_d >= 1`` topic posts, each iteration
    draws ``n_d`` of that day's posts uniformly without replacement and
    records every hotspot's distance to the nearest drawn post.
    """
    if iterations < 1:
        raise ConfigError("iterations must be >= 1")
    pc = posts if isinstance(posts, PostColumns) else PostColumns.from_posts(list(posts), cal)
    hc = hotspots if isinstance(hotspots, HotspotColumns) else HotspotColumns.from_hotspots(hotspots)
    topic_mask = np.asarray(topic_mask, dtype=bool)
    if topic_mask.shape != (len(pc),):
        raise ValueError("topic mask must align with posts")

    works = []
    excluded = 0
    post_days = {}
    if len(pc):
        order = np.argsort(pc.day, kind="stable")
        cuts = np.nonzero(np.diff(pc.day[order]))[0] + 1
        for grp in np.split(order, cuts):
            post_days[int(pc.day[grp[0]])] = grp
    hot_days = {}
    if len(hc):
        order = np.argsort(hc.day, kind="stable")
        cuts = np.nonzero(np.diff(hc.day[order]))[0] + 1
        for grp in np.split(order, cuts):
            hot_days[int(hc.day[grp[0]])] = grp
    for day in sorted(hot_days):
        hg = hot_days[day]
        pg = post_days.get(day)
        tcols = np.nonzero(topic_mask[pg])[0] if pg is not None else np.empty(0, np.int64)
        if len(tcols) == 0:
            excluded += len(hg)
            continue
        works.append(_DayWork(day, hc.lat[hg], hc.lon[hg], pc.lat[pg], pc.lon[pg], tcols))
    if not works:
        raise EmptyDistribution(f"{label}: no hotspot has a same-day topic post")

    if executor is None:
        results = [_day_null(w, iterations, seed, mode) for w in works]
    else:
        futures = [executor.submit(_day_null, w, iterations, seed, mode) for w in works]
        results = [f.result() for f in futures]

    real = np.ascontiguousarray(np.concatenate([r for r, _ in results]))
    null = np.concatenate([o for _, o in results], axis=1)
    per_it = np.empty((iterations, 3))
    for i in range(iterations):
        per_it[i] = _summary(np.ascontiguousarray(null[i]))
    rm, rmed, rsd = _summary(real)
    per_it.setflags(write=False)
    return NullModelResult(label, iterations, seed, rm, rmed, rsd, len(real), excluded, per_it)


def distribution_summary(samples: Iterable[float]) -> tuple:
    """Reference (mean, median, stdev) via the statistics module."""
    s = list(samples)
    return statistics.fmean(s), statistics.median(s), (statistics.stdev(s) if len(s) > 1 else 0.0)
