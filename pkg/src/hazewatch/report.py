"""Pipeline orchestration and CSV/JSON writers behind the command line."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, EmptyClass, EmptyDistribution, EmptyInput, HazewatchError
from .ingest import (
    AirQuality,
    AirQualityTable,
    assign_regions,
    load_air_quality,
    load_hotspots,
    load_posts,
    load_regions,
)
from .mobility import (
    PAIR_CLASSES,
    build_profiles,
    distance_cdf,
    home_regions,
    meta_signals,
    pair_samples,
    reduction_rate,
    region_diversity,
    region_subdistrict_visits,
    subdistrict_visit_buckets,
)
from .model import HotspotColumns, LocalCalendar, PostColumns, format_week, parse_week
from .ruledsl import TokenizedText, load_meta_keywords, load_taxonomies
from .spatial import (
    hotspot_to_tweet_distribution,
    null_model,
    popularity,
    tweet_to_hotspot_distribution,
)
from .temporal import (
    DATA_GAP_WEEKS,
    WeekClassConfig,
    build_weekly_series,
    classify_weeks,
    correlate_all,
)

log = logging.getLogger(__name__)

STAGES = ("ingest-check", "classify", "temporal", "spatial", "mobility", "all")
_NEEDS = {
    "ingest-check": set(),
    "classify": {"classify"},
    "temporal": {"classify", "temporal"},
    "spatial": {"classify", "spatial"},
    "mobility": {"classify", "temporal", "mobility"},
    "all": {"classify", "temporal", "spatial", "mobility"},
}
MALFORMED_LIMIT = 0.01
EXECUTION_FIELDS = ("out", "threads")


class ValidationFailure(HazewatchError):
    """Input rejected; the run stops with exit status 1."""


def _weeks_to_json(weeks) -> list:
    return [format_week(w) for w in sorted(weeks)]


@dataclass
class RunConfig:
    posts: Optional[str] = None
    hotspots: Optional[str] = None
    regions: Optional[str] = None
    air_quality: Optional[str] = None
    taxonomies: Optional[str] = None
    meta_keywords: Optional[str] = None
    out: str = "out"
    seed: int = 0
    iterations: int = 1000
    tau: int = 4
    rs_threshold: float = 1 / 3
    week_bounds: tuple = (100, 400)
    exclude_weeks: frozenset = DATA_GAP_WEEKS
    evac_weeks: frozenset = frozenset({(2014, 11)})
    utc_offset_minutes: int = 420
    distance: str = "haversine"
    strict: bool = False
    threads: int = 1
    pairing: str = "all"
    home_province: str = "Riau"
    home_region: str = "1471"
    region_days: Optional[tuple] = None
    bin_width_km: float = 5.0
    figures: bool = False

    def __post_init__(self):
        self.week_bounds = tuple(int(b) for b in self.week_bounds)
        self.exclude_weeks = frozenset(tuple(w) for w in self.exclude_weeks)
        self.evac_weeks = frozenset(tuple(w) for w in self.evac_weeks)
        if self.region_days is not None:
            self.region_days = tuple(d if isinstance(d, date) else date.fromisoformat(d)
                                     for d in self.region_days)

    def validate(self) -> None:
        if self.distance not in ("haversine", "euclid-degrees"):
            raise ConfigError(f"unknown distance mode {self.distance!r}")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.tau < 0:
            raise ConfigError("tau must be >= 0")
        if not self.rs_threshold > 0:
            raise ConfigError("rs threshold must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.pairing not in ("all", "first-baseline"):
            raise ConfigError(f"unknown pairing {self.pairing!r}")
        if self.bin_width_km <= 0:
            raise ConfigError("bin width must be positive")
        WeekClassConfig(*self.week_bounds)
        LocalCalendar(self.utc_offset_minutes)

    def to_json(self, *, execution: bool = True) -> dict:
        """Plain-JSON form; ``execution=False`` drops fields that cannot change results."""
        d = dataclasses.asdict(self)
        if not execution:
            for k in EXECUTION_FIELDS:
                d.pop(k)
        d["week_bounds"] = list(self.week_bounds)
        d["exclude_weeks"] = _weeks_to_json(self.exclude_weeks)
        d["evac_weeks"] = _weeks_to_json(self.evac_weeks)
        d["region_days"] = [x.isoformat() for x in self.region_days] if self.region_days else None
        return d

    @classmethod
    def from_json(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        d = dict(d)
        for k in ("exclude_weeks", "evac_weeks"):
            if k in d:
                d[k] = frozenset(parse_week(w) if isinstance(w, str) else tuple(w) for w in d[k])
        return cls(**d)


# -- writers -----------------------------------------------------------------


def _fmt(v) -> str:
    t = type(v)
    if t is str:
        return v
    if t is int:
        return str(v)
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    if isinstance(v, tuple) and len(v) == 2 and all(isinstance(x, int) for x in v):
        return format_week(v)
    if isinstance(v, date):
        return v.isoformat()
    if isinstance(v, AirQuality):
        return v.value
    return str(v)


class Outputs:
    """Tracks every file written under the output directory."""

    def __init__(self, root: Path):
        self.root = root
        self.files: list = []

    def path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return p

    def csv(self, name: str, header, rows) -> None:
        with self.path(name).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])

    def json(self, name: str, obj) -> None:
        self.path(name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def manifest(self) -> dict:
        entries = {}
        for name in sorted(set(self.files)):
            entries[name] = hashlib.sha256((self.root / name).read_bytes()).hexdigest()
        return entries


# -- pipeline ----------------------------------------------------------------


@dataclass
class Context:
    config: RunConfig
    cal: LocalCalendar
    out: Outputs
    executor: Optional[ThreadPoolExecutor]
    hotspots: list = field(default_factory=list)
    posts: list = field(default_factory=list)
    regions: list = field(default_factory=list)
    air: AirQualityTable = field(default_factory=AirQualityTable)
    taxonomies: list = field(default_factory=list)
    topics: list = field(default_factory=list)
    week_classes: object = None
    post_region: Optional[np.ndarray] = None
    hot_region: Optional[np.ndarray] = None


def _ingest(ctx: Context) -> None:
    cfg = ctx.config
    report = {}
    if cfg.hotspots:
        ctx.hotspots, hr = load_hotspots(cfg.hotspots, strict=cfg.strict)
        report["hotspots"] = {"total": hr.total, "after_peat_filter": hr.after_peat_filter,
                              "after_confidence_filter": hr.after_confidence_filter,
                              "malformed": hr.malformed, "errors": hr.errors}
    if cfg.posts:
        reader = load_posts(cfg.posts, strict=cfg.strict)
        ctx.posts = list(reader)
        pr = reader.report
        report["posts"] = {"total": pr.total, "accepted": pr.accepted, "malformed": pr.malformed,
                           "out_of_bbox": pr.out_of_bbox, "errors": pr.errors}
    if cfg.regions:
        ctx.regions = load_regions(cfg.regions)
        report["regions"] = {"count": len(ctx.regions),
                             "with_subdistricts": sum(1 for r in ctx.regions if r.has_subdistricts)}
    if cfg.air_quality:
        ctx.air = load_air_quality(cfg.air_quality)
        report["air_quality"] = {"readings": len(ctx.air)}
    ctx.out.json("ingest_report.json", report)
    for kind in ("hotspots", "posts"):
        r = report.get(kind)
        if r is None:
            continue
        seen = r["total"] + (r["malformed"] if kind == "hotspots" else 0)
        frac = r["malformed"] / seen if seen else 0.0
        if frac > MALFORMED_LIMIT:
            raise ValidationFailure(f"{kind}: {r['malformed']} of {seen} records malformed "
                                    f"({frac:.2%} > {MALFORMED_LIMIT:.0%})")


def _classify(ctx: Context) -> list:
    ctx.taxonomies = load_taxonomies(ctx.config.taxonomies)
    ctx.topics = [t.name for t in ctx.taxonomies]
    labels = []
    for p in ctx.posts:
        tt = TokenizedText(p.text)
        labels.append(frozenset(t.name for t in ctx.taxonomies if t.matches(tt)))
    ctx.out.csv("classifications.csv", ["post_id", "topics"],
                ((p.id, ";".join(sorted(l))) for p, l in zip(ctx.posts, labels)))
    return labels


def _areas(ctx: Context, labels):
    """area name -> (hotspots, posts, labels)."""
    areas = {"all": (ctx.hotspots, ctx.posts, labels)}
    if ctx.regions:
        prov = ctx.config.home_province
        inside = {i for i, r in enumerate(ctx.regions) if r.province == prov}
        if inside:
            keep_p = [i for i, r in enumerate(ctx.post_region.tolist()) if r in inside]
            keep_h = [i for i, r in enumerate(ctx.hot_region.tolist()) if r in inside]
            areas[prov] = ([ctx.hotspots[i] for i in keep_h], [ctx.posts[i] for i in keep_p],
                           [labels[i] for i in keep_p])
    return areas


def _temporal(ctx: Context, labels) -> None:
    cfg = ctx.config
    if not ctx.posts:
        raise EmptyInput("no posts: correlations are undefined")
    if not ctx.hotspots:
        raise EmptyInput("no hotspots: correlations are undefined")
    series_w = {}
    for area, (hs, ps, ls) in _areas(ctx, labels).items():
        try:
            series_w[area] = build_weekly_series(hs, ps, ls, ctx.cal, topics=ctx.topics)
        except EmptyInput:
            log.warning("area %s has no data", area)
    allw = series_w["all"]
    span = (allw.periods[0], allw.periods[-1])
    for area in list(series_w):
        if area != "all":
            hs, ps, ls = _areas(ctx, labels)[area]
            series_w[area] = build_weekly_series(hs, ps, ls, ctx.cal, topics=ctx.topics, span=span)
    rows = []
    for area, s in series_w.items():
        for i, w in enumerate(s.periods):
            rows.append([area, w, int(s.hotspot_count[i])] + [int(s.topic_counts[t][i]) for t in ctx.topics]
                        + [int(s.total_posts[i]), w in cfg.exclude_weeks])
    ctx.out.csv("weekly_series.csv", ["area", "week", "hotspots", *ctx.topics, "total", "excluded"], rows)

    daily = build_weekly_series(ctx.hotspots, ctx.posts, labels, ctx.cal, topics=ctx.topics, granularity="day")
    ctx.out.csv("daily_series.csv", ["day", "hotspots", *ctx.topics, "total"],
                ([d, int(daily.hotspot_count[i])] + [int(daily.topic_counts[t][i]) for t in ctx.topics]
                 + [int(daily.total_posts[i])] for i, d in enumerate(daily.periods)))

    cells = correlate_all(series_w, exclude=cfg.exclude_weeks, taxonomies=ctx.topics, executor=ctx.executor)
    ctx.out.csv("correlations.csv", ["area", "taxonomy", "r", "n_weeks", "status"],
                ([c.area, c.taxonomy, c.r, c.n_weeks, c.error or "ok"] for c in cells))

    wcfg = WeekClassConfig(cfg.week_bounds[0], cfg.week_bounds[1], cfg.exclude_weeks, cfg.evac_weeks)
    wc = classify_weeks(allw, wcfg)
    ctx.week_classes = wc
    ctx.out.csv("week_classes.csv", ["week", "hotspots", "class", "evacuation"],
                ([w, wc.counts[w], wc.of(w).value if wc.of(w) else "EXCLUDED", wc.is_evacuation(w)]
                 for w in allw.periods))


def _spatial(ctx: Context, labels) -> None:
    cfg = ctx.config
    if not ctx.posts or not ctx.hotspots:
        raise EmptyInput("spatial analysis needs both posts and hotspots")
    pc = PostColumns.from_posts(ctx.posts, ctx.cal)
    hc = HotspotColumns.from_hotspots(ctx.hotspots)
    pop = popularity(pc, hc, ctx.cal, cfg.distance)
    ctx.out.csv("popularity.csv", ["hotspot_id", "popularity"], zip(pop.hotspot_ids, pop.counts.tolist()))
    ctx.out.csv("popularity_frequency.csv", ["popularity", "hotspots"], sorted(pop.frequency().items()))

    summary = []
    nulls = []
    for label in ["ALL", *ctx.topics]:
        mask = np.ones(len(pc), bool) if label == "ALL" else np.array([label in l for l in labels], bool)
        sub = pc.take(np.nonzero(mask)[0])
        rows = []
        for fn in (tweet_to_hotspot_distribution, hotspot_to_tweet_distribution):
            try:
                dist = fn(sub, hc, ctx.cal, label=label, mode=cfg.distance, bin_width=cfg.bin_width_km)
            except EmptyDistribution as e:
                summary.append([label, fn.__name__.split("_to_")[0], 0, None, None, None, None, str(e)])
                continue
            edges, counts, dens = dist.histogram()
            for i in range(len(counts)):
                rows.append([dist.direction, float(edges[i]), float(edges[i + 1]), float(dens[i]), int(counts[i])])
            summary.append([label, dist.direction, dist.n, dist.mean, dist.median, dist.stdev, dist.excluded, "ok"])
        ctx.out.csv(f"distance_pdf_{label}.csv", ["direction", "bin_start", "bin_end", "density", "count"], rows)
        if label == "ALL":
            continue
        try:
            res = null_model(mask, pc, hc, ctx.cal, iterations=cfg.iterations, seed=cfg.seed, label=label,
                             mode=cfg.distance, executor=ctx.executor)
        except EmptyDistribution as e:
            nulls.append([label] + [None] * 11 + [str(e)])
            continue
        nulls.append([label, res.iterations, res.rng_seed, res.n_samples, res.excluded_hotspots,
                      res.real_mean, res.real_median, res.real_stdev, res.null_mean, res.null_median,
                      res.across_iteration_stdev, res.pooled_stdev, "ok"])
        ctx.out.csv(f"null_model_{label}.csv", ["iteration", "mean", "median", "stdev"],
                    ([i, *map(float, row)] for i, row in enumerate(res.per_iteration)))
    ctx.out.csv("distance_summary.csv",
                ["label", "direction", "n", "mean", "median", "stdev", "excluded", "status"], summary)
    ctx.out.csv("null_model_summary.csv",
                ["label", "iterations", "seed", "n_samples", "excluded_hotspots", "real_mean", "real_median",
                 "real_stdev", "null_mean", "null_median", "null_across_iteration_stdev", "null_pooled_stdev",
                 "status"], nulls)


def _mobility(ctx: Context) -> None:
    cfg = ctx.config
    profiles = build_profiles(ctx.posts, cfg.tau, ctx.cal, cfg.distance)
    ctx.out.csv("profiles.csv", ["user_id", "week", "centroid_lat", "centroid_lon", "spread_km", "posts"],
                ([p.user_id, w, s.centroid.lat, s.centroid.lon, s.spread, s.post_count]
                 for p in profiles for w, s in sorted(p.weeks.items())))
    samples = pair_samples(profiles, ctx.week_classes, pairing=cfg.pairing, mode=cfg.distance)
    ctx.out.csv("week_pairs.csv", ["user_id", "w1", "w2", "w2_class", "distance_km", "rs"],
                ([s.user_id, s.w1, s.w2, s.w2_class, s.distance, s.rs] for s in samples))
    for cls in PAIR_CLASSES:
        try:
            cdf = distance_cdf(samples, cls)
        except EmptyClass:
            ctx.out.csv(f"distance_cdf_{cls}.csv", ["distance_km", "cdf"], [])
            continue
        xs, ys = cdf.steps()
        ctx.out.csv(f"distance_cdf_{cls}.csv", ["distance_km", "cdf"], zip(xs.tolist(), ys.tolist()))
    cells = reduction_rate(samples, cfg.rs_threshold)
    ctx.out.csv("reduction_rates.csv",
                ["w2_class", "distance_bin", "n_pairs", "n_reducers", "per_pair", "n_users", "per_user_mean"],
                ([c.w2_class, c.bin_label, c.n_pairs, c.n_reducers, c.per_pair, c.n_users, c.per_user_mean]
                 for c in cells))

    if not ctx.regions:
        log.warning("no regions given; region analytics skipped")
        return
    homes = home_regions(ctx.posts, ctx.regions, region_index=ctx.post_region)
    cohort_users = {u for u, c in homes.items() if c == cfg.home_region}
    if not cohort_users:
        log.warning("no users with home region %s; region analytics skipped", cfg.home_region)
        return
    keep = [i for i, p in enumerate(ctx.posts) if p.user_id in cohort_users]
    cohort = [ctx.posts[i] for i in keep]
    ridx = ctx.post_region[keep]
    rows = region_diversity(cohort, ctx.regions, home_province=cfg.home_province, day_range=cfg.region_days,
                            cal=ctx.cal, air_quality=ctx.air, home_code=cfg.home_region, region_index=ridx)
    ctx.out.csv("region_diversity.csv", ["day", "inside", "outside", "total", "home_air_quality"],
                ([r.day, r.inside, r.outside, r.total, r.air_quality] for r in rows))
    visits = region_subdistrict_visits(cohort, ctx.regions, day_range=cfg.region_days, cal=ctx.cal,
                                       air_quality=ctx.air, region_index=ridx)
    ctx.out.csv("region_visits.csv", ["day", "region", "subdistricts_visited", "air_quality"],
                ([v.day, v.region, v.subdistricts_visited, v.air_quality] for v in visits))
    home = next((r for r in ctx.regions if r.code == cfg.home_region), None)
    if home is not None and home.has_subdistricts:
        buckets = subdistrict_visit_buckets(cohort, home, day_range=cfg.region_days, cal=ctx.cal)
        ctx.out.csv("subdistrict_buckets.csv", ["day", "1", "2", "3", "4+"],
                    ([d, b["1"], b["2"], b["3"], b["4+"]] for d, b in sorted(buckets.items())))
    meta = meta_signals(cohort, load_meta_keywords(cfg.meta_keywords), day_range=cfg.region_days, cal=ctx.cal)
    names = list(meta.counts)
    ctx.out.csv("meta_signals.csv", ["day", "total", *names],
                ([d, int(meta.total[i])] + [int(meta.counts[n][i]) for n in names]
                 for i, d in enumerate(meta.days)))


def run(stage: str, config: RunConfig) -> dict:
    """Run one stage (and what it depends on); returns the run manifest.

    Raises :class:`ValidationFailure`, :class:`EmptyInput` or other library
    errors on bad input; the caller maps them to exit codes.
    """
    if stage not in STAGES:
        raise ConfigError(f"unknown stage {stage!r}")
    config.validate()
    root = Path(config.out)
    root.mkdir(parents=True, exist_ok=True)
    out = Outputs(root)
    out.json("config.json", config.to_json(execution=False))
    cal = LocalCalendar(config.utc_offset_minutes)
    needs = _NEEDS[stage]
    executor = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    ctx = Context(config, cal, out, executor)
    try:
        _ingest(ctx)
        if ctx.regions:
            pc_lat = np.fromiter((p.location.lat for p in ctx.posts), float, len(ctx.posts))
            pc_lon = np.fromiter((p.location.lon for p in ctx.posts), float, len(ctx.posts))
            ctx.post_region = assign_regions(pc_lat, pc_lon, ctx.regions, warn_overlap=False)
            ctx.hot_region = assign_regions(
                np.fromiter((h.location.lat for h in ctx.hotspots), float, len(ctx.hotspots)),
                np.fromiter((h.location.lon for h in ctx.hotspots), float, len(ctx.hotspots)),
                ctx.regions, warn_overlap=False)
        labels = _classify(ctx) if "classify" in needs else None
        if "temporal" in needs:
            _temporal(ctx, labels)
        if "spatial" in needs:
            _spatial(ctx, labels)
        if "mobility" in needs:
            _mobility(ctx)
        if config.figures and stage != "ingest-check":
            from .plotting import render_figures
            render_figures(out)
    finally:
        if executor is not None:
            executor.shutdown()
    manifest = {"stage": stage, "files": out.manifest()}
    (root / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")
    return manifest
