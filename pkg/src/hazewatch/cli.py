"""``hazewatch`` command line.

Exit status: 0 on success, 1 when inputs fail validation, 2 on usage
errors.  Flags override a ``--config`` JSON file, which overrides defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, HazewatchError
from .model import parse_week
from .report import STAGES, RunConfig, run
from .synth import ScenarioConfig, generate

log = logging.getLogger("hazewatch")


def _weeks(text: str) -> frozenset:
    text = text.strip()
    if text.lower() in ("", "none"):
        return frozenset()
    try:
        return frozenset(parse_week(w) for w in text.split(",") if w.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _bounds(text: str) -> tuple:
    try:
        lo, hi = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo,hi integers, got {text!r}") from None
    if lo >= hi:
        raise argparse.ArgumentTypeError(f"need lo < hi, got {lo},{hi}")
    return lo, hi


def _days(text: str) -> tuple:
    try:
        a, b = text.split(":")
        from datetime import date
        return date.fromisoformat(a), date.fromisoformat(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected FIRST:LAST ISO dates, got {text!r}") from None


def _run_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    g = p.add_argument_group("inputs")
    g.add_argument("--posts", default=S, help="post file (id,user_id,timestamp,lat,lon,source,text)")
    g.add_argument("--hotspots", default=S, help="hotspot CSV")
    g.add_argument("--regions", default=S, help="region geometry, CSV or GeoJSON")
    g.add_argument("--air-quality", dest="air_quality", default=S, help="daily air-quality CSV")
    g.add_argument("--taxonomies", default=S, help="taxonomy rule file (default: bundled)")
    g.add_argument("--meta-keywords", dest="meta_keywords", default=S,
                   help="meta-signal keyword file (default: bundled)")
    g.add_argument("--config", default=None, help="JSON run config; flags take precedence")
    g = p.add_argument_group("analysis")
    g.add_argument("--out", default=S, help="output directory (default: out)")
    g.add_argument("--seed", type=int, default=S, help="null-model seed (default: 0)")
    g.add_argument("--iterations", type=int, default=S, help="null-model iterations (default: 1000)")
    g.add_argument("--tau", type=int, default=S, help="keep weeks with more than TAU posts (default: 4)")
    g.add_argument("--rs-threshold", dest="rs_threshold", type=float, default=S,
                   help="relative-spread reducer threshold (default: 1/3)")
    g.add_argument("--week-bounds", dest="week_bounds", type=_bounds, default=S, metavar="LO,HI",
                   help="week-class hotspot bounds (default: 100,400)")
    g.add_argument("--exclude-weeks", dest="exclude_weeks", type=_weeks, default=S, metavar="WEEKS",
                   help="comma-separated YYYY-Www list or 'none' (default: 2014 collection gaps)")
    g.add_argument("--evac-weeks", dest="evac_weeks", type=_weeks, default=S, metavar="WEEKS",
                   help="evacuation weeks (default: 2014-W11)")
    g.add_argument("--utc-offset-minutes", dest="utc_offset_minutes", type=int, default=S,
                   help="local calendar offset (default: 420)")
    g.add_argument("--distance", choices=("haversine", "euclid-degrees"), default=S,
                   help="distance metric (default: haversine)")
    g.add_argument("--pairing", choices=("all", "first-baseline"), default=S,
                   help="baseline week pairing (default: all)")
    g.add_argument("--home-province", dest="home_province", default=S, help="home province (default: Riau)")
    g.add_argument("--home-region", dest="home_region", default=S, help="cohort home region code (default: 1471)")
    g.add_argument("--region-days", dest="region_days", type=_days, default=S, metavar="FIRST:LAST",
                   help="day range for region analytics (default: span of cohort posts)")
    g.add_argument("--bin-width-km", dest="bin_width_km", type=float, default=S,
                   help="distance histogram bin width (default: 5)")
    g = p.add_argument_group("execution")
    g.add_argument("--strict", action="store_true", default=S, help="fail on the first malformed record")
    g.add_argument("--threads", type=int, default=S, help="worker threads (default: 1)")
    g.add_argument("--figures", action="store_true", default=S, help="also render PNG figures")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hazewatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    flags = _run_flags()
    helps = {
        "ingest-check": "load and validate the inputs, write ingest_report.json",
        "classify": "per-post topic sets",
        "temporal": "weekly series, correlations and week classes",
        "spatial": "popularity, distance distributions and null models",
        "mobility": "mobility profiles, reduction rates and region analytics",
        "all": "every analysis",
    }
    for name in STAGES:
        sub.add_parser(name, parents=[flags], help=helps[name], description=helps[name])
    sp = sub.add_parser("synth", help="generate a synthetic scenario", description="generate a synthetic scenario")
    sp.add_argument("--out", required=True, help="directory for the scenario files")
    sp.add_argument("--scenario", help="JSON scenario config")
    sp.add_argument("--seed", type=int, help="override the scenario seed")
    sp.add_argument("--users", type=int, help="override the number of users")
    sp.add_argument("--weeks", type=int, help="override the number of weeks")
    sp.add_argument("-v", "--verbose", action="store_true", help="log progress")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(json.loads(Path(args.config).read_text("utf-8")))
    skip = {"command", "config", "verbose"}
    values.update({k: v for k, v in vars(args).items() if k not in skip})
    cfg = RunConfig.from_json(values)
    cfg.validate()
    return cfg


def _synth(args) -> int:
    base = {}
    if args.scenario:
        base = json.loads(Path(args.scenario).read_text("utf-8"))
    for flag, key in (("seed", "seed"), ("users", "n_users"), ("weeks", "n_weeks")):
        v = getattr(args, flag)
        if v is not None:
            base[key] = v
    cfg = ScenarioConfig.from_dict(base)
    scen = generate(cfg, args.out)
    log.info("wrote %d posts, %d hotspots to %s", len(scen.posts), len(scen.hotspots), args.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            return _synth(args)
        try:
            cfg = resolve_config(args)
        except (ConfigError, ValueError, TypeError) as e:
            parser.print_usage(sys.stderr)
            print(f"hazewatch: error: {e}", file=sys.stderr)
            return 2
        manifest = run(args.command, cfg)
        log.info("%d files written to %s", len(manifest["files"]), cfg.out)
        return 0
    except ConfigError as e:
        print(f"hazewatch: error: {e}", file=sys.stderr)
        return 2
    except (HazewatchError, OSError, ValueError) as e:
        print(f"hazewatch: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
