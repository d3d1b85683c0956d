import csv
import hashlib
import json
from datetime import timedelta

import pytest

from hazewatch.cli import build_parser, main, resolve_config
from hazewatch.ingest import write_hotspots, write_posts
from hazewatch.report import STAGES
from hazewatch.synth import ScenarioConfig, generate
from conftest import at, hotspot, post

THREE = [
    post("p1", 0.5, 101.4, at(2014, 3, 13, 8), text="kabut asap makin tebal hari ini"),
    post("p2", 0.5, 101.4, at(2014, 3, 13, 9), text="#prayforriau jangan lupa pakai masker"),
    post("p3", 0.5, 101.4, at(2014, 3, 13, 10), text="selamat pagi"),
]


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def tree_digest(root):
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def scen_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli-scen")
    cfg = ScenarioConfig(seed=1, n_users=40, n_weeks=6, weekly_hotspots=[60, 150, 450, 80, 500, 30],
                         topic_correlation=0.8, reducer_fraction=0.3,
                         evacuation_date=ScenarioConfig().start + timedelta(days=30), fanout_regions=3)
    generate(cfg, d)
    return d


def scen_args(d, out, *extra):
    return ["--posts", str(d / "posts.txt"), "--hotspots", str(d / "hotspots.csv"),
            "--regions", str(d / "regions.csv"), "--air-quality", str(d / "air_quality.csv"),
            "--out", str(out), "--iterations", "20", "--exclude-weeks", "none",
            "--evac-weeks", "2014-W10", "--home-region", "1406", *extra]


def test_classify_three_posts(tmp_path):
    write_posts(tmp_path / "posts.txt", THREE)
    out = tmp_path / "out"
    assert main(["classify", "--posts", str(tmp_path / "posts.txt"), "--out", str(out)]) == 0
    got = {r["post_id"]: r["topics"] for r in read_csv(out / "classifications.csv")}
    assert got == {"p1": "haze-general", "p2": "haze-hashtag;haze-health", "p3": ""}
    manifest = json.loads((out / "run_manifest.json").read_text())
    listed = manifest["files"]
    assert "classifications.csv" in listed
    for name, h in listed.items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == h
    assert json.loads((out / "config.json").read_text())["tau"] == 4


def test_temporal_without_posts_exits_1(tmp_path, capsys):
    write_posts(tmp_path / "posts.txt", [])
    write_hotspots(tmp_path / "h.csv", [hotspot("h1", 0.5, 101.4)])
    rc = main(["temporal", "--posts", str(tmp_path / "posts.txt"), "--hotspots", str(tmp_path / "h.csv"),
               "--out", str(tmp_path / "out")])
    assert rc == 1
    assert "EmptyInput" in capsys.readouterr().err
    assert not (tmp_path / "out" / "correlations.csv").exists()


def test_malformed_posts_fail_validation(tmp_path, capsys):
    write_posts(tmp_path / "posts.txt", THREE)
    with open(tmp_path / "posts.txt", "a", encoding="utf-8") as fh:
        fh.write("garbage line\n")
    assert main(["ingest-check", "--posts", str(tmp_path / "posts.txt"), "--out", str(tmp_path / "o")]) == 1
    assert "malformed" in capsys.readouterr().err
    assert main(["ingest-check", "--strict", "--posts", str(tmp_path / "posts.txt"),
                 "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "posts.txt" in err and "line 5" in err  # header is line 1


@pytest.mark.parametrize("cmd", [*STAGES, "synth"])
def test_help_documents_flags(cmd, capsys):
    with pytest.raises(SystemExit) as e:
        main([cmd, "--help"])
    assert e.value.code == 0
    text = capsys.readouterr().out
    if cmd != "synth":
        for flag in ("--posts", "--hotspots", "--regions", "--air-quality", "--taxonomies", "--out", "--seed",
                     "--iterations", "--tau", "--rs-threshold", "--week-bounds", "--exclude-weeks",
                     "--evac-weeks", "--utc-offset-minutes", "--distance", "--strict", "--threads"):
            assert flag in text


def test_usage_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["classify", "--bogus"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["classify", "--week-bounds", "400,100"])
    assert e.value.code == 2
    assert main(["classify", "--threads", "0", "--out", str(tmp_path)]) == 2
    assert main(["synth", "--out", str(tmp_path / "s"), "--users", "0"]) == 2


def test_precedence_flags_over_file_over_defaults(tmp_path):
    cfgfile = tmp_path / "run.json"
    cfgfile.write_text(json.dumps({"tau": 7, "iterations": 50, "exclude_weeks": ["2014-W02"]}))
    args = build_parser().parse_args(["all", "--config", str(cfgfile), "--tau", "2"])
    cfg = resolve_config(args)
    assert cfg.tau == 2 and cfg.iterations == 50
    assert cfg.exclude_weeks == frozenset({(2014, 2)}) and cfg.seed == 0


def test_resolved_config_reproduces_run(tmp_path, scen_dir):
    out1 = tmp_path / "a"
    assert main(["temporal", *scen_args(scen_dir, out1, "--tau", "3")]) == 0
    saved = out1 / "config.json"
    out2 = tmp_path / "b"
    assert main(["temporal", "--config", str(saved), "--out", str(out2)]) == 0
    assert tree_digest(out1) == tree_digest(out2)


def test_all_outputs_and_determinism(tmp_path, scen_dir):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["all", *scen_args(scen_dir, a, "--threads", "1")]) == 0
    assert main(["all", *scen_args(scen_dir, b, "--threads", "4")]) == 0
    da = tree_digest(a)
    assert da == tree_digest(b)
    for name in ("ingest_report.json", "classifications.csv", "weekly_series.csv", "daily_series.csv",
                 "correlations.csv", "week_classes.csv", "popularity.csv", "distance_summary.csv",
                 "null_model_summary.csv", "profiles.csv", "week_pairs.csv", "reduction_rates.csv",
                 "region_diversity.csv", "subdistrict_buckets.csv", "meta_signals.csv", "config.json",
                 "run_manifest.json"):
        assert name in da, name
    manifest = json.loads((a / "run_manifest.json").read_text())
    assert set(manifest["files"]) == set(da) - {"run_manifest.json"}


def test_inputs_untouched(tmp_path, scen_dir):
    before = tree_digest(scen_dir)
    assert main(["mobility", *scen_args(scen_dir, tmp_path / "o")]) == 0
    assert tree_digest(scen_dir) == before


def test_figures_flag(tmp_path, scen_dir):
    out = tmp_path / "o"
    assert main(["temporal", *scen_args(scen_dir, out, "--figures")]) == 0
    assert (out / "figures" / "weekly_series.png").stat().st_size > 0


def test_synth_command(tmp_path):
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps({"n_weeks": 2, "hotspot_mean": 50}))
    assert main(["synth", "--out", str(tmp_path / "x"), "--scenario", str(spec), "--users", "5", "--seed", "3"]) == 0
    m = json.loads((tmp_path / "x" / "manifest.json").read_text())
    assert m["config"]["n_users"] == 5 and m["config"]["seed"] == 3 and m["config"]["n_weeks"] == 2
