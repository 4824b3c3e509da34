"""Command-line pipeline: fetch/import snapshots, resample, infer flows,
cluster day profiles, cross-tabulate, consistency-check and export maps.

Exit codes: 0 success, 1 validation problem, 2 I/O failure. Diagnostics
go to stderr; data goes to the named output files or stdout.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import date, timedelta
from pathlib import Path

from .cluster import KmeansConfig, fit, inertia_sweep, load_model_file, save_model
from .config import PipelineConfig, load_pipeline_config
from .errors import ConfigError, ShapeMismatchError, VelostatError
from .flows import daily_traffic_table, rank_stations, read_flows_csv, write_flows_csv
from .grid import (
    ImputationPolicy,
    TimeGrid,
    profiles_for_range,
    read_profiles_csv,
    write_profiles_csv,
)
from .ingest import (
    ArchiveWriter,
    build_archive,
    parse_feed_document,
    poll_feed,
    read_archive,
    station_directory,
    write_archive,
)
from .mapexport import dump_geojson, export_map, render_static_html
from .patterns import (
    consistency_check,
    crosstab,
    derive_day_type_map,
    format_crosstab_text,
    format_report_text,
    write_crosstab_csv,
    write_report_csv,
)
from .synth import generate_archive, load_scenario

API_KEY_ENV = "VELOSTAT_API_KEY"

# k presets for the two station styles the analysis distinguishes: busy
# mixed-use stations separate into four day shapes, quiet commuter
# stations into two.
K_PRESETS = {"busy": 4, "quiet": 2}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # map usage problems onto exit code 1
        raise _UsageError(f"{self.prog}: {message}")


def _grid(args, cfg: PipelineConfig) -> TimeGrid:
    zone = getattr(args, "zone", None) or cfg.zone
    step = getattr(args, "step_minutes", None) or cfg.step_minutes
    return TimeGrid(zone=zone, step=timedelta(minutes=step))


def _policy(args, cfg: PipelineConfig) -> ImputationPolicy:
    max_gap = getattr(args, "max_gap", None)
    return ImputationPolicy(max_gap=cfg.max_gap if max_gap is None else max_gap)


def _holidays(args, cfg: PipelineConfig) -> frozenset[date]:
    extra = frozenset(getattr(args, "holiday", None) or ())
    return cfg.holidays | extra


def _say(message: str) -> None:
    print(message, file=sys.stderr)


def cmd_fetch(args, cfg) -> int:
    api_key = os.environ.get(API_KEY_ENV, "")
    if not api_key:
        raise ConfigError(f"{API_KEY_ENV} is not set; export the feed API key first")
    with ArchiveWriter(args.out) as sink:
        totals = poll_feed(
            args.endpoint,
            api_key,
            timedelta(minutes=args.interval_minutes),
            sink,
            contract=args.contract,
            cycles=args.cycles,
            max_consecutive_failures=args.max_failures,
        )
    _say(
        f"fetch: {totals['cycles']} cycles, accepted {totals['accepted']}, "
        f"duplicates {totals['duplicates']}, rejected {totals['rejected']}"
    )
    return 0


def cmd_import(args, cfg) -> int:
    snapshots = []
    rejected = 0
    for input_path in args.inputs:
        p = Path(input_path)
        if p.suffix.lower() == ".json":
            parsed, rejections = parse_feed_document(p.read_text(encoding="utf-8"))
            snapshots.extend(parsed)
        else:
            archive, rejections = read_archive(p)
            snapshots.extend(archive.rows)
        rejected += len(rejections)
        for r in rejections:
            _say(f"{input_path}: {r.where}: {r.reason}")
    archive, duplicates = build_archive(snapshots, source="import")
    count = write_archive(archive, args.out)
    _say(f"import: wrote {count} rows ({len(duplicates)} duplicates, {rejected} rejected)")
    return 0


def cmd_resample(args, cfg) -> int:
    archive, rejections = read_archive(args.archive)
    for r in rejections:
        _say(f"{args.archive}: {r.where}: {r.reason}")
    min_completeness = (
        cfg.min_completeness if args.min_completeness is None else args.min_completeness
    )
    profiles, excluded = profiles_for_range(
        archive,
        args.station,
        args.start,
        args.end,
        _grid(args, cfg),
        _policy(args, cfg),
        min_completeness,
    )
    write_profiles_csv(profiles, args.out)
    for day, completeness in excluded:
        _say(f"excluded {day.isoformat()}: completeness {completeness:.3f}")
    _say(f"resample: {len(profiles)} profiles, {len(excluded)} excluded")
    return 0


def cmd_flows(args, cfg) -> int:
    profiles = read_profiles_csv(args.profiles)
    table, skipped = daily_traffic_table(profiles)
    write_flows_csv(table, args.out)
    for station_id, day, reason in skipped:
        _say(f"skipped station {station_id} on {day.isoformat()}: {reason}")
    _say(f"flows: {len(table)} station-days, {len(skipped)} skipped")
    if args.rank is not None:
        print("station_id,traffic_level")
        for flow in rank_stations(table, args.rank):
            print(f"{flow.station_id},{flow.traffic_level}")
    return 0


def cmd_cluster(args, cfg) -> int:
    profiles = read_profiles_csv(args.profiles)
    if args.k is not None:
        k = args.k
    elif args.preset is not None:
        k = K_PRESETS[args.preset]
    else:
        raise ConfigError("cluster needs --k or --preset")
    config = KmeansConfig(
        k=k,
        seed=args.seed,
        restarts=args.restarts,
        max_iterations=args.max_iterations,
        tolerance=args.tolerance,
        missing_mode=args.missing_mode,
    )
    if args.sweep is not None:
        lo, _, hi = args.sweep.partition(":")
        ks = range(int(lo), int(hi or lo) + 1)
        print("k,inertia")
        for k_value, inertia in inertia_sweep(profiles, ks, config):
            print(f"{k_value},{inertia!r}")
        return 0
    if args.out is None:
        raise ConfigError("cluster needs --out (or --sweep)")
    model = fit(profiles, config)
    save_model(model, args.out)
    _say(
        f"cluster: k={model.k} inertia={model.inertia:.3f} "
        f"iterations={model.iterations} profiles={len(profiles)}"
    )
    return 0


def _aligned_profiles(model, profiles_path):
    profiles = read_profiles_csv(profiles_path)
    if len(profiles) != len(model.assignments):
        raise ShapeMismatchError(
            f"{profiles_path}: {len(profiles)} profiles do not align with "
            f"{len(model.assignments)} model assignments"
        )
    return profiles


def cmd_crosstab(args, cfg) -> int:
    model = load_model_file(args.model)
    profiles = _aligned_profiles(model, args.profiles)
    tab = crosstab(model, [p.date for p in profiles], _holidays(args, cfg))
    write_crosstab_csv(tab, args.out)
    if args.text:
        print(format_crosstab_text(tab), end="")
    return 0


def cmd_check(args, cfg) -> int:
    model = load_model_file(args.model)
    holidays = _holidays(args, cfg)
    train = _aligned_profiles(model, args.train_profiles)
    tab = crosstab(model, [p.date for p in train], holidays)
    day_type_map = derive_day_type_map(tab, collapse_weekend=args.collapse_weekend)
    new_profiles = read_profiles_csv(args.profiles)
    report = consistency_check(new_profiles, model, day_type_map, holidays)
    write_report_csv(report, args.out)
    if args.text:
        print(format_report_text(report), end="")
    else:
        print(f"match rate: {report.match_rate:.4f}")
    return 0


def cmd_export_map(args, cfg) -> int:
    flows = [f for f in read_flows_csv(args.flows) if f.date == args.date]
    archive, _ = read_archive(args.archive)
    doc = export_map(flows, station_directory(archive))
    Path(args.out).write_text(dump_geojson(doc), encoding="utf-8")
    if args.html is not None:
        title = f"Station traffic {args.date.isoformat()}"
        Path(args.html).write_text(render_static_html(doc, title), encoding="utf-8")
    _say(f"export-map: {len(doc['features'])} stations for {args.date.isoformat()}")
    return 0


def cmd_synth(args, cfg) -> int:
    scenario = load_scenario(args.scenario)
    archive = generate_archive(scenario, _grid(args, cfg))
    count = write_archive(archive, args.out)
    _say(f"synth: wrote {count} rows for {len(scenario.stations)} stations")
    return 0


def _add_grid_flags(sub, completeness: bool = False):
    sub.add_argument("--zone", help="IANA timezone for day boundaries")
    sub.add_argument("--step-minutes", type=int, dest="step_minutes", help="grid step")
    if completeness:
        sub.add_argument("--max-gap", type=int, dest="max_gap",
                         help="max forward-fill gap in slots")
        sub.add_argument("--min-completeness", type=float, dest="min_completeness",
                         help="exclude days observed less than this fraction")


def _add_holiday_flag(sub):
    sub.add_argument("--holiday", action="append", type=date.fromisoformat,
                     help="extra holiday date (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="velostat", description=__doc__)
    parser.add_argument("--config", help="key=value configuration file")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("fetch", help="poll a station feed into a CSV archive")
    sub.add_argument("--endpoint", required=True)
    sub.add_argument("--contract", help="contract name passed to the feed")
    sub.add_argument("--interval-minutes", type=int, default=10, dest="interval_minutes")
    sub.add_argument("--cycles", type=int, help="stop after this many polls (default: run forever)")
    sub.add_argument("--max-failures", type=int, default=10, dest="max_failures")
    sub.add_argument("--out", required=True)
    sub.set_defaults(handler=cmd_fetch)

    sub = commands.add_parser("import", help="merge feed JSON or archive CSV files")
    sub.add_argument("inputs", nargs="+")
    sub.add_argument("--out", required=True)
    sub.set_defaults(handler=cmd_import)

    sub = commands.add_parser("resample", help="build day profiles for one station")
    sub.add_argument("--archive", required=True)
    sub.add_argument("--station", type=int, required=True)
    sub.add_argument("--start", type=date.fromisoformat, required=True)
    sub.add_argument("--end", type=date.fromisoformat, required=True)
    sub.add_argument("--out", required=True)
    _add_grid_flags(sub, completeness=True)
    sub.set_defaults(handler=cmd_resample)

    sub = commands.add_parser("flows", help="infer daily check-ins/check-outs")
    sub.add_argument("--profiles", required=True)
    sub.add_argument("--out", required=True)
    sub.add_argument("--rank", type=date.fromisoformat,
                     help="print stations ranked by traffic for this date")
    sub.set_defaults(handler=cmd_flows)

    sub = commands.add_parser("cluster", help="k-means over day profiles")
    sub.add_argument("--profiles", required=True)
    sub.add_argument("--k", type=int)
    sub.add_argument("--preset", choices=sorted(K_PRESETS),
                     help="busy: k=4, quiet: k=2")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--restarts", type=int, default=10)
    sub.add_argument("--max-iterations", type=int, default=300, dest="max_iterations")
    sub.add_argument("--tolerance", type=float, default=1e-6)
    sub.add_argument("--missing-mode", default="profile-mean", dest="missing_mode",
                     choices=["profile-mean", "drop-slot"])
    sub.add_argument("--sweep", help="K range LO:HI; print inertia per k instead of fitting")
    sub.add_argument("--out")
    sub.set_defaults(handler=cmd_cluster)

    sub = commands.add_parser("crosstab", help="cluster-by-weekday membership table")
    sub.add_argument("--model", required=True)
    sub.add_argument("--profiles", required=True, help="the profiles the model was fit on")
    sub.add_argument("--out", required=True)
    sub.add_argument("--text", action="store_true", help="also print an aligned table")
    _add_holiday_flag(sub)
    sub.set_defaults(handler=cmd_crosstab)

    sub = commands.add_parser("check", help="validate new days against learned patterns")
    sub.add_argument("--model", required=True)
    sub.add_argument("--train-profiles", required=True, dest="train_profiles")
    sub.add_argument("--profiles", required=True, help="new day profiles to check")
    sub.add_argument("--out", required=True)
    sub.add_argument("--collapse-weekend", action="store_true", dest="collapse_weekend",
                     help="treat Saturday and Sunday-like days as one weekend type")
    sub.add_argument("--text", action="store_true")
    _add_holiday_flag(sub)
    sub.set_defaults(handler=cmd_check)

    sub = commands.add_parser("export-map", help="GeoJSON traffic map for one date")
    sub.add_argument("--flows", required=True)
    sub.add_argument("--date", type=date.fromisoformat, required=True)
    sub.add_argument("--archive", required=True, help="archive CSV supplying coordinates")
    sub.add_argument("--out", required=True)
    sub.add_argument("--html", help="also write a self-contained HTML page")
    sub.set_defaults(handler=cmd_export_map)

    sub = commands.add_parser("synth", help="generate a synthetic archive from a scenario")
    sub.add_argument("--scenario", required=True)
    sub.add_argument("--out", required=True)
    _add_grid_flags(sub)
    sub.set_defaults(handler=cmd_synth)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_pipeline_config(args.config) if args.config else PipelineConfig()
        return args.handler(args, cfg)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except VelostatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:  # malformed input files, bad flag values
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
