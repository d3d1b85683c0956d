"""Exit criteria.  Each test records a one-line detail shown in the summary."""

import hashlib
import json
import math
import random
import resource
import subprocess
import sys
import time
from datetime import date, timedelta

import numpy as np
import pytest

from hazewatch.cli import main
from hazewatch.ingest import assign_regions
from hazewatch.model import FireHotspot, GeoPoint, GeoPost, HotspotColumns, PostColumns
from hazewatch.mobility import build_profiles, home_regions, pair_samples, reduction_rate, region_diversity
from hazewatch.ruledsl import classify, load_taxonomies, matches, parse_rule
from hazewatch.spatial import nearest_join, null_model
from hazewatch.synth import ScenarioConfig, build_layout, generate, oracle_nearest
from hazewatch.temporal import WeekClass, build_weekly_series, class_of_count, classify_weeks, pearson
from hazewatch.temporal import WeekClassConfig
from corpus import CORPUS
from dsl_reference import random_pairs, ref_eval
from pip_oracle import star_polygon, winding_number
from test_temporal import textbook_r

pytestmark = pytest.mark.acceptance

WIB_START = date(2014, 3, 1)


def detail(record_property, text):
    record_property("detail", text)


def tree_digest(root):
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def run_args(d, out):
    return ["--posts", str(d / "posts.txt"), "--hotspots", str(d / "hotspots.csv"),
            "--regions", str(d / "regions.csv"), "--air-quality", str(d / "air_quality.csv"),
            "--out", str(out)]


# 1 ---------------------------------------------------------------------------


def test_criterion_01_rule_fixture(record_property):
    t0 = time.perf_counter()
    taxes = load_taxonomies()
    wrong = [(text, classify(text, taxes), want) for text, want in CORPUS if classify(text, taxes) != want]
    elapsed = time.perf_counter() - t0
    expected = {"haze-general": 43, "haze-hashtag": 5, "haze-health": 39, "haze-impact": 39}
    distinct = {t.name: t.keyword_count for t in taxes}
    combos = {t.name: t.conjunct_count for t in taxes}
    detail(record_property,
           f"corpus {len(CORPUS) - len(wrong)}/{len(CORPUS)} in {elapsed:.3f}s; "
           f"distinct keywords {distinct}; and-combinations {combos}; expected {expected}")
    assert len(CORPUS) == 40 and not wrong, wrong
    assert elapsed < 1.0
    assert combos == expected or distinct == expected


# 2 ---------------------------------------------------------------------------


def test_criterion_02_dsl_semantics(record_property):
    pairs = random_pairs(2024, 200)
    from dsl_reference import ref_tokens
    bad = [(src, text) for src, tree, text in pairs if matches(parse_rule(src), text) != ref_eval(tree, ref_tokens(text))]
    hits = sum(ref_eval(tree, ref_tokens(text)) for _, tree, text in pairs)
    detail(record_property, f"{200 - len(bad)}/200 agree ({hits} true, {200 - hits} false)")
    assert not bad


# 3 ---------------------------------------------------------------------------


def test_criterion_03_pearson_oracle(record_property):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        x = rng.integers(0, 500, 52).astype(float)
        y = 0.5 * x + rng.normal(0, 80, 52)
        r = pearson(x, y)
        worst = max(worst, abs(r - textbook_r(x.tolist(), y.tolist())))
        a, b = rng.uniform(0.1, 10), rng.uniform(-100, 100)
        assert abs(pearson(a * x + b, y) - r) <= 1e-12
        assert abs(pearson(x, a * y - b) - r) <= 1e-12
        assert pearson(y, x) == pytest.approx(r, abs=1e-12)
        assert abs(pearson(-a * x, y) + r) <= 1e-12
    detail(record_property, f"max |r - oracle| = {worst:.2e} over 100 pairs (n=52)")
    assert worst <= 1e-12


# 4 ---------------------------------------------------------------------------


def test_criterion_04_planted_correlation(record_property):
    t0 = time.perf_counter()
    inside = []
    rs = []
    for seed in range(100):
        cfg = ScenarioConfig(seed=seed, n_weeks=52, n_users=10, topic_correlation=0.8, extra_topic_rates={},
                             nonpeat_ratio=0.0, lowconf_ratio=0.0)
        scen = generate(cfg)
        rho = scen.manifest["planted"]["topic_correlation"]
        topic = scen.manifest["planted"]["topic"]
        labels = [scen.truth[p.id] for p in scen.posts]
        series = build_weekly_series(scen.kept_hotspots, scen.posts, labels, topics=[topic])
        r = pearson(series.hotspot_count, series.topic_counts[topic])
        rs.append(r)
        inside.append(rho - 0.15 <= r <= rho + 0.15)
    elapsed = time.perf_counter() - t0
    detail(record_property, f"{sum(inside)}/100 seeds with r in [0.65, 0.95]; "
                            f"median r {np.median(rs):.3f}; {elapsed:.1f}s")
    assert sum(inside) >= 95
    assert elapsed < 30


# 5 ---------------------------------------------------------------------------


def nn_instance(seed):
    rng = np.random.default_rng(seed)
    posts, hots = [], []
    for d in range(30):
        day = WIB_START + timedelta(days=d)
        n_p = int(rng.integers(100, 1001))
        n_h = 0 if rng.random() < 0.1 else int(rng.integers(1, 301))
        hl = rng.uniform(-1, 1, n_h)
        ho = rng.uniform(100, 102, n_h)
        # duplicated locations under different ids
        dup = rng.random(n_h) < 0.1
        if n_h > 1:
            src = rng.integers(0, n_h, n_h)
            hl = np.where(dup, hl[src], hl)
            ho = np.where(dup, ho[src], ho)
        # exact mirror pairs on a dyadic grid
        n_m = min(n_h // 10, 10)
        for k in range(n_m):
            la, lo = float(rng.integers(-4, 5)) / 8, 101 + float(rng.integers(-8, 9)) / 8
            hots += [FireHotspot(f"m{seed:02d}{d:02d}{k:02d}{s}", day, GeoPoint(la, lo + s_off))
                     for s, s_off in (("a", 0.0625), ("b", -0.0625))]
            posts.append(GeoPost(f"pm{d}-{k}", "u", _noon(day), GeoPoint(la, lo), ""))
        ids = rng.permutation(n_h)
        hots += [FireHotspot(f"h{ids[j]:04d}-{d:02d}", day, GeoPoint(float(hl[j]), float(ho[j]))) for j in range(n_h)]
        pl = rng.uniform(-1, 1, n_p)
        po = rng.uniform(100, 102, n_p)
        on = rng.random(n_p) < 0.05
        if n_h:
            pick = rng.integers(0, n_h, n_p)
            pl = np.where(on, hl[pick], pl)
            po = np.where(on, ho[pick], po)
        secs = rng.integers(0, 86400, n_p)
        posts += [GeoPost(f"p{d}-{i}", "u", _noon(day, int(secs[i])), GeoPoint(float(pl[i]), float(po[i])), "")
                  for i in range(n_p)]
    return posts, hots


def _noon(day, sec=43200):
    from datetime import datetime, timezone
    return datetime(day.year, day.month, day.day, tzinfo=timezone(timedelta(hours=7))) + timedelta(seconds=sec)


def test_criterion_05_nearest_neighbor_exactness(record_property):
    t0 = time.perf_counter()
    records = mismatches = ties = 0
    for seed in range(20):
        posts, hots = nn_instance(seed)
        pc = PostColumns.from_posts(posts)
        hc = HotspotColumns.from_hotspots(hots)
        idx, dist = nearest_join(pc, hc)
        got = [None if i < 0 else (hc.ids[i], float(x)) for i, x in zip(idx.tolist(), dist.tolist())]
        want = oracle_nearest(posts, hots)
        mismatches += sum(g != w for g, w in zip(got, want))
        records += len(posts)
        ties += sum(1 for p in posts if p.id.startswith("pm"))
    elapsed = time.perf_counter() - t0
    detail(record_property, f"{records - mismatches}/{records} records equal over 20 instances "
                            f"({ties} planted equidistant ties); {elapsed:.1f}s")
    assert mismatches == 0
    assert elapsed < 60


# 6 ---------------------------------------------------------------------------


def _null_cfg(seed, **kw):
    base = dict(seed=seed, n_weeks=4, n_users=100, placement="uniform", hotspot_mean=50,
                hotspot_sd=10, topic_rate=0.1, extra_topic_rates={})
    return ScenarioConfig(**{**base, **kw})


def _null_run(cfg, seed):
    scen = generate(cfg)
    topic = scen.manifest["planted"]["topic"]
    mask = np.array([topic in scen.truth[p.id] for p in scen.posts])
    return null_model(mask, scen.posts, scen.kept_hotspots, iterations=1000, seed=seed)


def test_criterion_06_null_model_calibration(record_property):
    t0 = time.perf_counter()
    calibrated = separated = 0
    for seed in range(100):
        r = _null_run(_null_cfg(seed), seed)
        calibrated += abs(r.real_mean - r.null_mean) <= 2 * r.across_iteration_stdev
        c = _null_run(_null_cfg(seed, topic_concentration_km=10.0), seed)
        separated += c.real_mean < c.null_mean
    sweep = time.perf_counter() - t0
    t1 = time.perf_counter()
    big = _null_cfg(0, n_users=2100)
    r = _null_run(big, 0)
    big_time = time.perf_counter() - t1
    n_big = 2100 * 6 * 4
    detail(record_property, f"signal-free within 2 sd: {calibrated}/100; concentrated real<null: {separated}/100; "
                            f"sweep {sweep:.1f}s; {n_big} posts x 1000 iterations in {big_time:.1f}s")
    assert separated == 100
    assert big_time < 300
    assert calibrated >= 95


# 7 ---------------------------------------------------------------------------


def test_criterion_07_determinism(record_property, tmp_path):
    scen = tmp_path / "scen"
    generate(ScenarioConfig(seed=7, n_weeks=12, n_users=80, topic_correlation=0.8, reducer_fraction=0.3,
                            evacuation_date=ScenarioConfig().start + timedelta(days=40), fanout_regions=4), scen)
    outs = {}
    for name, threads in (("a", 1), ("b", 1), ("c", 8)):
        out = tmp_path / name
        assert main(["all", *run_args(scen, out), "--threads", str(threads), "--seed", "5",
                     "--exclude-weeks", "none"]) == 0
        outs[name] = tree_digest(out)
    same_seed = outs["a"] == outs["b"]
    threads = outs["a"] == outs["c"]
    detail(record_property, f"{len(outs['a'])} files; rerun identical: {same_seed}; threads 1 vs 8 identical: {threads}")
    assert same_seed and threads


# 8 ---------------------------------------------------------------------------


def test_criterion_08_mobility_recovery(record_property):
    got = {}
    for f, seed in ((0.2, 81), (0.4, 82), (0.6, 83)):
        cfg = ScenarioConfig(seed=seed, n_users=2000, n_weeks=4, weekly_hotspots=[50, 500, 60, 700],
                             reducer_fraction=f, spread_multiplier=0.25, extra_topic_rates={})
        scen = generate(cfg)
        planted = scen.manifest["planted"]
        series = build_weekly_series(scen.kept_hotspots, scen.posts, [()] * len(scen.posts))
        wc = classify_weeks(series, WeekClassConfig(cfg.week_low, cfg.week_high, frozenset(), frozenset()))
        pairs = pair_samples(build_profiles(scen.posts), wc)
        (cell,) = [c for c in reduction_rate(pairs) if c.w2_class == "SEVERE" and c.bin_label == "all"]
        got[planted["reducer_fraction"]] = cell.per_pair
    bounds = {n: class_of_count(n).name for n in (99, 100, 400, 401)}
    detail(record_property, "recovered " + ", ".join(f"{f}->{r:.3f}" for f, r in got.items())
           + f"; boundaries {bounds}")
    for f, r in got.items():
        assert abs(r - f) <= 0.03
    assert bounds == {99: "NO_HAZE", 100: "HAZE", 400: "HAZE", 401: "SEVERE_HAZE"}


# 9 ---------------------------------------------------------------------------


def _first_region_by_winding(x, y, rings):
    for i, ring in enumerate(rings):
        if winding_number(x, y, ring) != 0:
            return i
    return -1


def test_criterion_09_region_analytics(record_property):
    fanout = {}
    for k in (2, 4, 6, 9):
        ev = ScenarioConfig().start + timedelta(days=17)
        cfg = ScenarioConfig(seed=900 + k, n_users=60, n_weeks=4, evacuation_date=ev, fanout_regions=k,
                             extra_topic_rates={})
        scen = generate(cfg)
        planted = scen.manifest["planted"]
        hr = home_regions(scen.posts, scen.regions)
        cohort = [p for p in scen.posts if hr[p.user_id] == planted["home_region"]]
        (row,) = region_diversity(cohort, scen.regions, home_province=planted["home_province"],
                                  day_range=(date.fromisoformat(planted["evacuation_date"]),) * 2)
        fanout[planted["fanout_regions"]] = row.total

    from hazewatch.ingest import RegionDef
    rng = random.Random(9)
    grid = build_layout(ScenarioConfig())
    stars = [RegionDef(f"s{i}", "X", [GeoPoint(y, x) for x, y in
                                      star_polygon(rng, 100 + 3 * (i % 4), 3 * (i // 4), rng.randint(5, 14), 0.4, 1.4)[:-1]])
             for i in range(8)]
    disagree = 0
    for regions in (grid, stars):
        lat0 = min(p.lat for r in regions for p in r.polygon) - 0.5
        lat1 = max(p.lat for r in regions for p in r.polygon) + 0.5
        lon0 = min(p.lon for r in regions for p in r.polygon) - 0.5
        lon1 = max(p.lon for r in regions for p in r.polygon) + 0.5
        rings = [[(p.lon, p.lat) for p in r.polygon] for r in regions]
        lat = np.array([rng.uniform(lat0, lat1) for _ in range(1000)])
        lon = np.array([rng.uniform(lon0, lon1) for _ in range(1000)])
        got = assign_regions(lat, lon, regions)
        want = [_first_region_by_winding(x, y, rings) for x, y in zip(lon.tolist(), lat.tolist())]
        disagree += int(np.count_nonzero(got != np.array(want)))
    detail(record_property, f"fan-out k -> regions visited {fanout}; point-in-polygon disagreements {disagree}/2000")
    assert all(k == v for k, v in fanout.items())
    assert disagree == 0


# 10 --------------------------------------------------------------------------

SCALE = {"seed": 7, "n_weeks": 52, "n_users": 320, "hotspot_mean": 96, "hotspot_sd": 60,
         "topic_correlation": 0.8, "evacuation_date": "2014-03-13", "fanout_regions": 4}
MEMORY_LIMIT_MB = 2048


@pytest.mark.slow
def test_criterion_10_scale(record_property, tmp_path):
    scen_dir = tmp_path / "scen"
    scen = generate(ScenarioConfig.from_dict(SCALE), scen_dir)
    counts = scen.manifest["counts"]
    out = tmp_path / "out"
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "hazewatch.cli", "all", *run_args(scen_dir, out)],
                          capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    peak_mb = resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss / 1024
    detail(record_property, f"{counts['posts']} posts, {counts['hotspots_after_confidence_filter']} hotspots, "
                            f"{counts['regions']} regions: exit {proc.returncode} in {elapsed:.1f}s, "
                            f"peak RSS {peak_mb:.0f} MB")
    assert proc.returncode == 0, proc.stderr
    assert counts["posts"] >= 100_000 and counts["hotspots_after_confidence_filter"] >= 5_000
    assert counts["regions"] == 12
    assert elapsed < 60
    assert peak_mb < MEMORY_LIMIT_MB
    assert len(json.loads((out / "run_manifest.json").read_text())["files"]) > 15
