"""Synthetic scenarios with planted ground truth, plus brute-force oracles.

A scenario is a grid of rectangular regions (each split into rectangular
sub-districts), a weekly hotspot process, and a user cohort whose posts
carry known topics and known mobility behaviour.  Everything is drawn from
named sub-streams of one seed, so the same config always yields the same
bytes.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .ingest import (
    AirQuality,
    AirQualityTable,
    RegionDef,
    write_air_quality,
    write_hotspots,
    write_posts,
    write_regions_csv,
)
from .model import (
    EARTH_RADIUS_KM,
    Confidence,
    FireHotspot,
    GeoPoint,
    GeoPost,
    HotspotColumns,
    LocalCalendar,
    PostColumns,
    distance_array,
    week_of,
)

KM_PER_DEG = EARTH_RADIUS_KM * math.pi / 180.0

FILLER = (
    "selamat", "pagi", "makan", "siang", "teman", "kopi", "jalan", "kota", "hari", "ini",
    "senang", "lagi", "kantor", "pasar", "belajar", "musik", "nonton", "film", "hujan",
    "malam", "sore", "ayo", "kita", "main", "bola",
)
TOPIC_PHRASES = {
    "haze-general": ("kabut asap", "titik api", "polusi udara", "haze"),
    "haze-hashtag": ("#saveriau", "#prayforriau", "#melawanasap"),
    "haze-impact": ("jarak pandang",),
    "haze-health": ("masker", "batuk", "ispa"),
}
SOURCES = {"mobile": "Twitter for Android", "browser": "Twitter Web Client", "checkin": "Foursquare"}


@dataclass
class ScenarioConfig:
    seed: int = 42
    start: date = date(2014, 1, 6)
    n_weeks: int = 12
    utc_offset_minutes: int = 420
    # layout: grid_rows x grid_cols regions of cell_deg degrees, row-major codes
    grid_rows: int = 3
    grid_cols: int = 4
    origin_lat: float = -1.5
    origin_lon: float = 100.0
    cell_deg: float = 1.0
    subdistrict_rows: int = 2
    subdistrict_cols: int = 2
    home_province: str = "Riau"
    inside_regions: int = 8
    home_region: int = 5
    # hotspots: kept (peatland, high-confidence) counts per week
    weekly_hotspots: Optional[list] = None
    hotspot_mean: float = 200.0
    hotspot_sd: float = 100.0
    nonpeat_ratio: float = 0.5
    lowconf_ratio: float = 0.5
    # users and posts
    n_users: int = 100
    home_fraction: float = 1.0
    posts_per_user_week: int = 6
    placement: str = "users"  # "users": around personal anchors; "uniform": over the layout
    user_radius_km: float = 5.0
    radius_jitter: float = 0.1
    # topics
    topic: str = "haze-general"
    topic_rate: float = 0.1
    topic_correlation: Optional[float] = None
    topic_sd_fraction: float = 0.3
    topic_concentration_km: Optional[float] = None
    extra_topic_rates: dict = field(default_factory=lambda: {
        "haze-hashtag": 0.01, "haze-impact": 0.01, "haze-health": 0.02})
    home_keyword_rate: float = 0.02
    evacuation_keyword_rate: float = 0.01
    browser_rate: float = 0.1
    checkin_rate: float = 0.05
    # behaviour in severe-haze weeks
    week_low: int = 100
    week_high: int = 400
    reducer_fraction: float = 0.0
    spread_multiplier: float = 0.25
    shift_fraction: float = 0.0
    centroid_shift_km: float = 100.0
    # evacuation fan-out of the home cohort on one day
    evacuation_date: Optional[date] = None
    fanout_regions: int = 0
    air_missing_rate: float = 0.1

    def validate(self) -> None:
        if self.n_weeks < 1 or self.n_users < 1:
            raise ConfigError("need at least one week and one user")
        if self.start.isoweekday() != 1:
            raise ConfigError(f"start must be a Monday, got {self.start}")
        if self.placement not in ("users", "uniform"):
            raise ConfigError(f"unknown placement {self.placement!r}")
        if not 0.0 <= self.topic_rate <= 1.0:
            raise ConfigError("topic rate exceeds the post rate (must be within [0, 1])")
        for name, rate in self.extra_topic_rates.items():
            if name not in TOPIC_PHRASES or not 0.0 <= rate <= 1.0:
                raise ConfigError(f"bad extra topic rate {name}={rate}")
        if self.topic not in TOPIC_PHRASES:
            raise ConfigError(f"unknown topic {self.topic!r}")
        if self.topic_correlation is not None and not -1.0 <= self.topic_correlation <= 1.0:
            raise ConfigError("topic correlation must lie in [-1, 1]")
        n_regions = self.grid_rows * self.grid_cols
        if not 0 <= self.home_region < n_regions or not 0 <= self.inside_regions <= n_regions:
            raise ConfigError("home region / inside region count outside the grid")
        if self.fanout_regions > n_regions:
            raise ConfigError(f"cannot fan out into {self.fanout_regions} of {n_regions} regions")
        if self.evacuation_date is not None and self.fanout_regions < 1:
            raise ConfigError("an evacuation date needs fanout_regions >= 1")
        for name in ("reducer_fraction", "shift_fraction", "home_fraction", "air_missing_rate",
                     "browser_rate", "checkin_rate", "home_keyword_rate", "evacuation_keyword_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.browser_rate + self.checkin_rate > 1.0:
            raise ConfigError("browser and check-in rates exceed 1")
        margin_km = 3 * self.user_radius_km * (1 + self.radius_jitter)
        if self.placement == "users" and margin_km * 2 >= self.cell_deg * KM_PER_DEG * 0.5:
            raise ConfigError("user radius too large for the region cells")
        if self.shift_fraction > 0 and self.centroid_shift_km > self.grid_cols * self.cell_deg * KM_PER_DEG * 0.4:
            raise ConfigError("centroid shift does not fit inside the layout")
        if self.weekly_hotspots is not None and len(self.weekly_hotspots) != self.n_weeks:
            raise ConfigError("weekly_hotspots needs one entry per week")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, date):
                d[k] = v.isoformat()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown scenario keys {sorted(unknown)}")
        for k in ("start", "evacuation_date"):
            if isinstance(d.get(k), str):
                d[k] = date.fromisoformat(d[k])
        return cls(**d)


@dataclass
class Scenario:
    config: ScenarioConfig
    hotspots: list  # raw, before the peat/confidence filter
    posts: list
    regions: list
    air_quality: AirQualityTable
    truth: dict  # post id -> frozenset of topics
    manifest: dict

    @property
    def kept_hotspots(self) -> list:
        return [h for h in self.hotspots if h.peatland and h.confidence is Confidence.HIGH]


# -- layout ------------------------------------------------------------------


def _rect(lat0, lon0, lat1, lon1) -> tuple:
    return (GeoPoint(lat0, lon0), GeoPoint(lat0, lon1), GeoPoint(lat1, lon1), GeoPoint(lat1, lon0))


def build_layout(cfg: ScenarioConfig) -> list:
    regions = []
    idx = 0
    for r in range(cfg.grid_rows):
        for c in range(cfg.grid_cols):
            lat0 = cfg.origin_lat + r * cfg.cell_deg
            lon0 = cfg.origin_lon + c * cfg.cell_deg
            inside = idx < cfg.inside_regions
            code = f"14{idx + 1:02d}" if inside else f"13{idx + 1:02d}"
            province = cfg.home_province if inside else "Other"
            subs = []
            sh = cfg.cell_deg / cfg.subdistrict_rows
            sw = cfg.cell_deg / cfg.subdistrict_cols
            for sr in range(cfg.subdistrict_rows):
                for sc in range(cfg.subdistrict_cols):
                    subs.append((f"{code}-{sr * cfg.subdistrict_cols + sc + 1}",
                                 _rect(lat0 + sr * sh, lon0 + sc * sw,
                                       lat0 + (sr + 1) * sh, lon0 + (sc + 1) * sw)))
            regions.append(RegionDef(code, province,
                                     _rect(lat0, lon0, lat0 + cfg.cell_deg, lon0 + cfg.cell_deg),
                                     tuple(subs)))
            idx += 1
    return regions


def _bbox(cfg: ScenarioConfig):
    return (cfg.origin_lat, cfg.origin_lon,
            cfg.origin_lat + cfg.grid_rows * cfg.cell_deg, cfg.origin_lon + cfg.grid_cols * cfg.cell_deg)


def _cell_origin(cfg: ScenarioConfig, idx: int):
    r, c = divmod(idx, cfg.grid_cols)
    return cfg.origin_lat + r * cfg.cell_deg, cfg.origin_lon + c * cfg.cell_deg


def _offset(lat, lon, dx_km, dy_km):
    """Small local offset (east, north) in km -> new lat/lon arrays."""
    lat = np.asarray(lat, float)
    nlat = lat + np.asarray(dy_km) / KM_PER_DEG
    nlon = np.asarray(lon, float) + np.asarray(dx_km) / (KM_PER_DEG * np.cos(np.radians(lat)))
    return nlat, nlon


# -- generation --------------------------------------------------------------


def _weekly_hotspots(cfg, rng) -> np.ndarray:
    if cfg.weekly_hotspots is not None:
        return np.asarray(cfg.weekly_hotspots, dtype=np.int64)
    z = rng.standard_normal(cfg.n_weeks)
    return np.maximum(0, np.rint(cfg.hotspot_mean + cfg.hotspot_sd * z)).astype(np.int64)


def _classes(counts, low, high):
    return np.where(counts < low, 0, np.where(counts > high, 2, 1))


def generate(cfg: ScenarioConfig, out_dir=None) -> Scenario:
    """Draw a scenario; with ``out_dir`` also write it in the ingest formats."""
    cfg.validate()
    streams = [np.random.Generator(np.random.PCG64(s))
               for s in np.random.SeedSequence(cfg.seed).spawn(7)]
    rng_hot, rng_users, rng_posts, rng_topic, rng_text, rng_air, rng_evac = streams
    tz = LocalCalendar(cfg.utc_offset_minutes).tz
    regions = build_layout(cfg)
    n_regions = len(regions)
    lat_lo, lon_lo, lat_hi, lon_hi = _bbox(cfg)
    W = cfg.n_weeks
    days_total = 7 * W

    # hotspots
    weekly = _weekly_hotspots(cfg, rng_hot)
    wclass = _classes(weekly, cfg.week_low, cfg.week_high)
    parts = []  # per week: day index, lat, lon, peatland, high confidence
    for w in range(W):
        k = int(weekly[w])
        n_np = int(round(k * cfg.nonpeat_ratio))
        n_lc = int(round(k * cfg.lowconf_ratio))
        n = k + n_np + n_lc
        if not n:
            continue
        days = rng_hot.integers(0, 7, n) + 7 * w
        hl = rng_hot.uniform(lat_lo, lat_hi, n)
        ho = rng_hot.uniform(lon_lo, lon_hi, n)
        conf_draw = rng_hot.random(n)
        peat = np.arange(n) < k
        peat[k + n_np:] = True
        high = np.arange(n) < k
        high[k:k + n_np] = conf_draw[k:k + n_np] < 0.5
        parts.append((days, hl, ho, peat, high))
    if parts:
        h_day, h_lat, h_lon, h_peat, h_high = (np.concatenate(c) for c in zip(*parts))
    else:
        h_day, h_lat, h_lon = np.empty(0, np.int64), np.empty(0), np.empty(0)
        h_peat = h_high = np.empty(0, bool)
    order = np.lexsort((h_lon, h_lat, h_day))
    hotspots = [
        FireHotspot(f"h{i:07d}", cfg.start + timedelta(days=d), GeoPoint(la, lo),
                    Confidence.HIGH if hi else Confidence.LOW, pe)
        for i, (d, la, lo, pe, hi) in enumerate(zip(h_day[order].tolist(), h_lat[order].tolist(),
                                                   h_lon[order].tolist(), h_peat[order].tolist(),
                                                   h_high[order].tolist()))
    ]
    kept_by_day: dict = {}
    for h in hotspots:
        if h.peatland and h.confidence is Confidence.HIGH:
            kept_by_day.setdefault((h.date - cfg.start).days, []).append(h)

    # users
    U = cfg.n_users
    home_flag = rng_users.random(U) < cfg.home_fraction
    others = [i for i in range(n_regions) if i != cfg.home_region] or [cfg.home_region]
    user_region = np.where(home_flag, cfg.home_region,
                           np.asarray(others)[rng_users.integers(0, len(others), U)])
    margin = 3 * cfg.user_radius_km * (1 + cfg.radius_jitter) / KM_PER_DEG
    anchor_lat = np.empty(U)
    anchor_lon = np.empty(U)
    for u in range(U):
        la0, lo0 = _cell_origin(cfg, int(user_region[u]))
        m_lon = margin / math.cos(math.radians(la0 + cfg.cell_deg / 2)) + margin
        anchor_lat[u] = rng_users.uniform(la0 + margin, la0 + cfg.cell_deg - margin)
        anchor_lon[u] = rng_users.uniform(lo0 + m_lon, lo0 + cfg.cell_deg - m_lon)
    reducer = rng_users.random(U) < cfg.reducer_fraction
    shifter = rng_users.random(U) < cfg.shift_fraction

    # posts: arrays over (week, user, k)
    K = cfg.posts_per_user_week
    n_posts = W * U * K
    p_week = np.repeat(np.arange(W), U * K)
    p_user = np.tile(np.repeat(np.arange(U), K), W)
    p_k = np.tile(np.arange(K), W * U)
    p_day = p_week * 7 + rng_posts.integers(0, 7, n_posts)
    p_sec = rng_posts.integers(0, 86400, n_posts)
    if cfg.placement == "users":
        jitter = rng_posts.uniform(1 - cfg.radius_jitter, 1 + cfg.radius_jitter, W * U)
        rot = rng_posts.uniform(0, 2 * math.pi, W * U)
        severe_wu = np.repeat(wclass == 2, U)
        red_wu = np.tile(reducer, W) & severe_wu
        shift_wu = np.tile(shifter, W) & severe_wu
        radius = cfg.user_radius_km * jitter * np.where(red_wu, cfg.spread_multiplier, 1.0)
        theta = np.repeat(rot, K) + 2 * math.pi * p_k / K
        r_post = np.repeat(radius, K)
        # shift toward the layout's interior so shifted posts stay inside it
        toward = np.where(anchor_lon < (lon_lo + lon_hi) / 2, 1.0, -1.0)
        shift_km = np.where(shift_wu, np.tile(toward, W) * cfg.centroid_shift_km, 0.0)
        dx = r_post * np.cos(theta) + np.repeat(shift_km, K)
        dy = r_post * np.sin(theta)
        p_lat, p_lon = _offset(anchor_lat[p_user], anchor_lon[p_user], dx, dy)
    else:
        p_lat = rng_posts.uniform(lat_lo, lat_hi, n_posts)
        p_lon = rng_posts.uniform(lon_lo, lon_hi, n_posts)

    # evacuation fan-out: cohort posts on that day go to k destination regions
    destinations = []
    extra = []
    if cfg.evacuation_date is not None:
        ev = (cfg.evacuation_date - cfg.start).days
        if not 0 <= ev < days_total:
            raise ConfigError("evacuation date outside the scenario")
        destinations = sorted(int(i) for i in rng_evac.choice(n_regions, cfg.fanout_regions, replace=False))
        cohort = np.nonzero(user_region == cfg.home_region)[0]
        dest_of = {int(u): destinations[j % len(destinations)] for j, u in enumerate(cohort)}

        def _dest_point(u):
            la0, lo0 = _cell_origin(cfg, dest_of[u])
            inset = cfg.cell_deg * 0.05
            return (rng_evac.uniform(la0 + inset, la0 + cfg.cell_deg - inset),
                    rng_evac.uniform(lo0 + inset, lo0 + cfg.cell_deg - inset))

        for i in np.nonzero((p_day == ev) & np.isin(p_user, cohort))[0]:
            p_lat[i], p_lon[i] = _dest_point(int(p_user[i]))
        for u in cohort.tolist():
            la, lo = _dest_point(u)
            extra.append((ev, int(rng_evac.integers(0, 86400)), u, la, lo))
    if extra:
        e = np.array(extra, dtype=float)
        p_day = np.concatenate([p_day, e[:, 0].astype(np.int64)])
        p_sec = np.concatenate([p_sec, e[:, 1].astype(np.int64)])
        p_user = np.concatenate([p_user, e[:, 2].astype(np.int64)])
        p_lat = np.concatenate([p_lat, e[:, 3]])
        p_lon = np.concatenate([p_lon, e[:, 4]])
        p_week = np.concatenate([p_week, e[:, 0].astype(np.int64) // 7])
        n_posts = len(p_day)

    # topic membership
    topic_mask = np.zeros(n_posts, dtype=bool)
    weekly_topic = None
    clipped = 0
    if cfg.topic_correlation is not None:
        rho = cfg.topic_correlation
        hs = weekly.astype(float)
        sd = hs.std()
        zh = (hs - hs.mean()) / sd if sd > 0 else np.zeros(W)
        latent = rho * zh + math.sqrt(max(0.0, 1 - rho * rho)) * rng_topic.standard_normal(W)
        per_week = np.bincount(p_week, minlength=W)
        mean_t = cfg.topic_rate * per_week.mean()
        target = np.rint(mean_t + cfg.topic_sd_fraction * mean_t * latent).astype(np.int64)
        weekly_topic = np.clip(target, 0, per_week)
        clipped = int(np.count_nonzero(weekly_topic != target))
        for w in range(W):
            members = np.nonzero(p_week == w)[0]
            pick = rng_topic.choice(members, int(weekly_topic[w]), replace=False)
            topic_mask[pick] = True
    else:
        topic_mask = rng_topic.random(n_posts) < cfg.topic_rate

    concentrated = 0
    if cfg.topic_concentration_km is not None:
        sigma = cfg.topic_concentration_km / 2.0
        for i in np.nonzero(topic_mask)[0]:
            hs_day = kept_by_day.get(int(p_day[i]))
            if not hs_day:
                continue
            h = hs_day[int(rng_topic.integers(0, len(hs_day)))]
            while True:
                dx, dy = rng_topic.normal(0.0, sigma, 2)
                if dx * dx + dy * dy <= cfg.topic_concentration_km ** 2:
                    break
            la, lo = _offset(h.location.lat, h.location.lon, dx, dy)
            p_lat[i], p_lon[i] = float(np.clip(la, lat_lo, lat_hi)), float(np.clip(lo, lon_lo, lon_hi))
            concentrated += 1

    # text, topics and sources
    extra_names = sorted(cfg.extra_topic_rates)
    extra_draw = {n: rng_text.random(n_posts) < cfg.extra_topic_rates[n] for n in extra_names}
    home_kw = rng_text.random(n_posts) < cfg.home_keyword_rate
    evac_kw = rng_text.random(n_posts) < cfg.evacuation_keyword_rate
    src_draw = rng_text.random(n_posts)
    fill_idx = rng_text.integers(0, len(FILLER), (n_posts, 4))
    phrase_pick = rng_text.integers(0, 1 << 30, (n_posts, 1 + len(extra_names)))

    order = np.lexsort((p_user, p_sec, p_day))
    posts = []
    truth = {}
    for rank, i in enumerate(order.tolist()):
        words = [FILLER[j] for j in fill_idx[i]]
        topics = set()
        if topic_mask[i]:
            ph = TOPIC_PHRASES[cfg.topic]
            words.insert(2, ph[phrase_pick[i, 0] % len(ph)])
            topics.add(cfg.topic)
        for j, name in enumerate(extra_names):
            if extra_draw[name][i]:
                ph = TOPIC_PHRASES[name]
                words.append(ph[phrase_pick[i, 1 + j] % len(ph)])
                topics.add(name)
        if home_kw[i]:
            words.append("di rumah")
        if evac_kw[i]:
            words.append("evakuasi")
        if src_draw[i] < cfg.browser_rate:
            source = SOURCES["browser"]
        elif src_draw[i] < cfg.browser_rate + cfg.checkin_rate:
            source = SOURCES["checkin"]
        else:
            source = SOURCES["mobile"]
        ts = datetime.combine(cfg.start + timedelta(days=int(p_day[i])), datetime.min.time(), tz) \
            + timedelta(seconds=int(p_sec[i]))
        pid = f"p{rank:08d}"
        posts.append(GeoPost(pid, f"u{int(p_user[i]):05d}", ts,
                             GeoPoint(float(p_lat[i]), float(p_lon[i])), " ".join(words), source))
        truth[pid] = frozenset(topics)

    # air quality per region and day, from the week class
    aq = {}
    by_class = {0: (AirQuality.GREEN, AirQuality.BLUE), 1: (AirQuality.YELLOW,),
                2: (AirQuality.RED, AirQuality.BLACK)}
    for reg in regions:
        draws = rng_air.random((days_total, 2))
        for d in range(days_total):
            if draws[d, 0] < cfg.air_missing_rate:
                continue
            opts = by_class[int(wclass[d // 7])]
            aq[(reg.code, cfg.start + timedelta(days=d))] = opts[int(draws[d, 1] * len(opts))]
    air = AirQualityTable(aq)

    n_kept = sum(1 for h in hotspots if h.peatland and h.confidence is Confidence.HIGH)
    n_peat = sum(1 for h in hotspots if h.peatland)
    manifest = {
        "schema": "hazewatch-scenario/1",
        "config": cfg.to_dict(),
        "planted": {
            "topic": cfg.topic,
            "topic_correlation": cfg.topic_correlation,
            "topic_concentration_km": cfg.topic_concentration_km,
            "topic_clipped_weeks": clipped,
            "topic_posts_concentrated": concentrated,
            "reducer_fraction": cfg.reducer_fraction,
            "realized_reducer_fraction": float(reducer.mean()),
            "spread_multiplier": cfg.spread_multiplier,
            "shift_fraction": cfg.shift_fraction,
            "centroid_shift_km": cfg.centroid_shift_km,
            "evacuation_date": cfg.evacuation_date.isoformat() if cfg.evacuation_date else None,
            "fanout_regions": cfg.fanout_regions,
            "fanout_destinations": [regions[i].code for i in destinations],
            "home_region": regions[cfg.home_region].code,
            "home_province": cfg.home_province,
        },
        "weeks": [
            {"week": f"{week_of(cfg.start + timedelta(days=7 * w))[0]}-W{week_of(cfg.start + timedelta(days=7 * w))[1]:02d}",
             "hotspots": int(weekly[w]),
             "class": ("NO_HAZE", "HAZE", "SEVERE_HAZE")[int(wclass[w])],
             "topic_posts": int(weekly_topic[w]) if weekly_topic is not None else None}
            for w in range(W)
        ],
        "counts": {
            "posts": len(posts),
            "users": U,
            "topic_posts": int(topic_mask.sum()),
            "hotspots_total": len(hotspots),
            "hotspots_after_peat_filter": n_peat,
            "hotspots_after_confidence_filter": n_kept,
            "regions": n_regions,
        },
    }
    scen = Scenario(cfg, hotspots, posts, regions, air, truth, manifest)
    if out_dir is not None:
        write_scenario(scen, out_dir)
    return scen


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_scenario(scen: Scenario, out_dir) -> dict:
    """Write the four datasets, a truth table and ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "hotspots": out / "hotspots.csv",
        "posts": out / "posts.txt",
        "regions": out / "regions.csv",
        "air_quality": out / "air_quality.csv",
        "truth": out / "truth.csv",
    }
    write_hotspots(files["hotspots"], scen.hotspots)
    write_posts(files["posts"], scen.posts)
    write_regions_csv(files["regions"], scen.regions)
    write_air_quality(files["air_quality"], scen.air_quality)
    with files["truth"].open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("post_id,topics\n")
        for pid in sorted(scen.truth):
            fh.write(f"{pid},{';'.join(sorted(scen.truth[pid]))}\n")
    manifest = dict(scen.manifest)
    manifest["files"] = {k: {"path": p.name, "sha256": _sha256(p)} for k, p in files.items()}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")
    return manifest


# -- oracles -----------------------------------------------------------------


def oracle_nearest(posts: Sequence[GeoPost], hotspots: Sequence[FireHotspot],
                   cal: LocalCalendar = LocalCalendar(), mode: str = "haversine") -> list:
    """Exhaustive same-day nearest hotspot for every post.

    Scans every same-day hotspot; ties go to the smallest id.  Returns a
    list of ``(hotspot_id, km)`` or ``None`` aligned with ``posts``.
    """
    pc = PostColumns.from_posts(list(posts), cal)
    hotspots = sorted(hotspots, key=lambda h: h.id)
    hc = HotspotColumns.from_hotspots(hotspots)
    out = [None] * len(pc)
    by_day: dict = {}
    for j, d in enumerate(hc.day.tolist()):
        by_day.setdefault(d, []).append(j)
    for i in range(len(pc)):
        cand = by_day.get(int(pc.day[i]))
        if not cand:
            continue
        cand = np.asarray(cand)
        dist = distance_array(pc.lat[i], pc.lon[i], hc.lat[cand], hc.lon[cand], mode)
        j = int(np.argmin(dist))  # first minimum: hotspots are in id order
        out[i] = (hc.ids[int(cand[j])], float(dist[j]))
    return out
