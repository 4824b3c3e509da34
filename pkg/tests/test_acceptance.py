"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see per-criterion
output. All tolerances are pinned here, not configurable.
"""

import filecmp
from dataclasses import replace
from datetime import date

import numpy as np
import pytest

from velostat.cli import main
from velostat.cluster import KmeansConfig, dump_model, fit, load_model
from velostat.flows import FlowSummary, infer_flows
from velostat.grid import (
    DIRECT,
    IMPUTED,
    MISSING,
    TimeGrid,
    build_day_profile,
    profiles_for_range,
)
from velostat.ingest import read_archive, write_archive
from velostat.mapexport import R_MAX, export_map, radius_px
from velostat.patterns import (
    consistency_check,
    crosstab,
    derive_day_type_map,
)
from velostat.synth import (
    COMMUTER_RAIL,
    MIXED,
    ScenarioStation,
    SyntheticScenario,
    builtin_archetypes,
    generate_archive,
)

from conftest import profile_of, snap
from test_cluster import best_two_partition_inertia
from test_mapexport import validate_geojson

GRID = TimeGrid()
MONDAY = date(2016, 9, 12)
HOLIDAY_MONDAY = date(2016, 9, 26)
TRAIN_END = date(2016, 10, 16)  # five full weeks from MONDAY
HOLDOUT_START = date(2016, 10, 17)
HOLDOUT_END = date(2016, 10, 30)  # a disjoint fortnight


def _passed(n: int, message: str) -> None:
    print(f"criterion {n:2d} PASS: {message}")


def commuter_scenario(noise: float, seed: int = 41) -> SyntheticScenario:
    archetype = replace(builtin_archetypes()[COMMUTER_RAIL], noise_amplitude=noise)
    return SyntheticScenario(
        stations=(ScenarioStation(101, archetype, 53.3465, -6.2929),),
        start=MONDAY,
        end=HOLDOUT_END,
        holidays=frozenset({HOLIDAY_MONDAY}),
        seed=seed,
    )


def mixed_scenario(noise: float, seed: int = 52) -> SyntheticScenario:
    archetype = replace(builtin_archetypes()[MIXED], noise_amplitude=noise)
    return SyntheticScenario(
        stations=(ScenarioStation(202, archetype, 53.3318, -6.2606),),
        start=MONDAY,
        end=date(2016, 10, 9),  # four full weeks
        seed=seed,
    )


def profiles_between(archive, station_id, start, end):
    profiles, excluded = profiles_for_range(archive, station_id, start, end, GRID)
    assert excluded == []
    return profiles


def test_criterion_01_flow_conservation_and_time_reversal():
    rng = np.random.default_rng(1001)
    checked = 0
    for _ in range(1000):
        n_slots = int(rng.integers(2, 145))
        values = rng.integers(0, 41, size=n_slots).tolist()
        flags = [
            MISSING if rng.random() < 0.15 else (IMPUTED if rng.random() < 0.1 else DIRECT)
            for _ in range(n_slots)
        ]
        non_missing = [v for v, f in zip(values, flags) if f != MISSING]
        if len(non_missing) < 2:
            flags[0] = flags[-1] = DIRECT
            non_missing = [v for v, f in zip(values, flags) if f != MISSING]
        profile = profile_of(values, flags)
        flow = infer_flows(profile)
        assert flow.check_ins - flow.check_outs == non_missing[-1] - non_missing[0]
        assert flow.check_ins >= 0 and flow.check_outs >= 0

        reverse = profile_of(list(reversed(values)), list(reversed(flags)))
        back = infer_flows(reverse)
        assert (back.check_ins, back.check_outs) == (flow.check_outs, flow.check_ins)
        checked += 1
    assert checked == 1000
    _passed(1, "conservation and time-reversal exact over 1000 seeded profiles")


@pytest.fixture(scope="module")
def small_instance_corpus():
    rng = np.random.default_rng(2002)
    config = KmeansConfig(k=2, seed=17, restarts=20)
    corpus = []
    for _ in range(200):
        n = int(rng.integers(2, 9))
        d = int(rng.integers(1, 3))
        X = rng.uniform(-10.0, 10.0, size=(n, d))
        corpus.append((X, fit(X, config)))
    return corpus


def test_criterion_02_kmeans_matches_exhaustive_partition_optimum(small_instance_corpus):
    for X, model in small_instance_corpus:
        optimum = best_two_partition_inertia(X)
        assert abs(model.inertia - optimum) <= 1e-9, (
            f"fit inertia {model.inertia} vs optimum {optimum} on n={len(X)}"
        )
    _passed(2, "200 seeded instances (n<=8, d<=2, k=2) reach the exhaustive optimum within 1e-9")


def test_criterion_03_lloyd_inertia_monotone_every_run(small_instance_corpus):
    runs = iterations = 0
    for _, model in small_instance_corpus:
        assert len(model.histories) == 20
        for history in model.histories:
            for before, after in zip(history, history[1:]):
                assert after <= before, f"inertia rose {before} -> {after}"
                iterations += 1
            runs += 1
    assert runs == 200 * 20
    _passed(3, f"inertia non-increasing across {iterations} iteration steps in {runs} runs")


def test_criterion_04_commuter_pattern_recovery():
    archetype = builtin_archetypes()[COMMUTER_RAIL]
    weekday = archetype.template_by_day_type["weekday"]
    template_range = max(weekday) - min(weekday)
    noise = 3.5
    assert noise <= 0.1 * template_range

    archive = generate_archive(commuter_scenario(noise), GRID)
    train = profiles_between(archive, 101, MONDAY, TRAIN_END)
    assert len(train) == 35
    model = fit(train, KmeansConfig(k=2, seed=9, restarts=10))
    tab = crosstab(model, [p.date for p in train], {HOLIDAY_MONDAY})

    weekend_days = {
        p.date
        for p in train
        if p.date.weekday() >= 5 or p.date == HOLIDAY_MONDAY
    }
    assert len(weekend_days) == 11  # 5 Saturdays, 5 Sundays, 1 holiday Monday
    clusters_of = {
        day_type: {model.assignments[i] for i, p in enumerate(train) if (p.date in weekend_days) == day_type}
        for day_type in (True, False)
    }
    assert len(clusters_of[True]) == 1 and len(clusters_of[False]) == 1
    weekend_cluster = clusters_of[True].pop()
    assert clusters_of[False] != {weekend_cluster}
    assert tab.counts[weekend_cluster] == (1, 0, 0, 0, 0, 5, 5)
    other = tab.counts[1 - weekend_cluster]
    assert sum(other[:5]) == 24 and other[5] == other[6] == 0
    assert tab.holiday_notes == ((HOLIDAY_MONDAY, weekend_cluster, 0),)
    _passed(4, "k=2 cross-tab 100% pure: weekend days plus holiday Monday vs ordinary weekdays")


def test_criterion_05_holdout_fortnight_consistency():
    archive = generate_archive(commuter_scenario(3.5), GRID)
    train = profiles_between(archive, 101, MONDAY, TRAIN_END)
    model = fit(train, KmeansConfig(k=2, seed=9, restarts=10))
    tab = crosstab(model, [p.date for p in train], {HOLIDAY_MONDAY})
    day_type_map = derive_day_type_map(tab, collapse_weekend=True)

    holdout = profiles_between(archive, 101, HOLDOUT_START, HOLDOUT_END)
    assert len(holdout) == 14
    assert sum(p.date.weekday() >= 5 for p in holdout) == 4
    report = consistency_check(holdout, model, day_type_map, {HOLIDAY_MONDAY})
    assert report.match_rate >= 0.95
    _passed(5, f"hold-out fortnight match rate {report.match_rate:.3f} >= 0.95")


def test_criterion_06_four_pattern_separation():
    scenario = mixed_scenario(noise=1.0)
    archetype = scenario.stations[0].archetype
    archive = generate_archive(scenario, GRID)
    train = profiles_between(archive, 202, scenario.start, scenario.end)
    assert len(train) == 28
    model = fit(train, KmeansConfig(k=4, seed=3, restarts=10))

    majority_class = {}
    for c in range(4):
        classes = [
            archetype.day_class(train[i].date, frozenset())
            for i in model.members(c)
        ]
        assert classes, f"cluster {c} is empty"
        majority_class[c] = max(set(classes), key=classes.count)
    assert sorted(majority_class.values()) == sorted(archetype.template_by_day_type)

    by_class = {v: k for k, v in majority_class.items()}
    early = model.centroids[by_class["early-week"]]
    late = model.centroids[by_class["late-week"]]
    cut = 17 * 6  # slot index for 17:00
    gap = np.abs(early - late)
    assert gap[:cut].max() < gap[cut:].max()
    _passed(
        6,
        "k=4 majorities match the generating templates; early/late-week centroids "
        f"diverge after 17:00 (pre gap {gap[:cut].max():.2f} < post gap {gap[cut:].max():.2f})",
    )


def test_criterion_07_noiseless_identity():
    for name, k in ((COMMUTER_RAIL, 2), (MIXED, 4)):
        archetype = replace(builtin_archetypes()[name], noise_amplitude=0.0)
        assert archetype.distinct_templates() == k
        scenario = SyntheticScenario(
            stations=(ScenarioStation(9, archetype, 53.3, -6.3),),
            start=MONDAY,
            end=date(2016, 10, 9),
            seed=1,
        )
        archive = generate_archive(scenario, GRID)
        profiles = profiles_between(archive, 9, scenario.start, scenario.end)
        model = fit(profiles, KmeansConfig(k=k, seed=0, restarts=10))
        assert model.inertia == 0.0
        assert {tuple(c) for c in model.centroids.tolist()} == {
            tuple(t) for t in archetype.template_by_day_type.values()
        }
    _passed(7, "noise 0 with k=#templates gives inertia 0 and exact template centroids")


def test_criterion_08_round_trips(tmp_path):
    # archive CSV: write -> read -> write is byte-identical
    archive = generate_archive(commuter_scenario(2.0), GRID)
    p1, p2 = tmp_path / "a1.csv", tmp_path / "a2.csv"
    write_archive(archive, p1)
    restored, rejections = read_archive(p1)
    assert rejections == [] and restored.rows == archive.rows
    write_archive(restored, p2)
    assert p1.read_bytes() == p2.read_bytes()

    # model document: dump -> load -> dump is byte-identical
    train = profiles_between(archive, 101, MONDAY, TRAIN_END)
    model = fit(train, KmeansConfig(k=2, seed=9, restarts=10))
    text = dump_model(model)
    assert dump_model(load_model(text)) == text

    # resampling an on-grid archive is the identity
    profile = build_day_profile(restored, 101, MONDAY, GRID)
    original = build_day_profile(archive, 101, MONDAY, GRID)
    assert profile == original
    assert profile.flags == (DIRECT,) * GRID.slots_per_day

    # the 10-minute grid has exactly 144 slots on a non-DST day
    assert GRID.slots_per_day == 144
    assert len(profile.values) == 144
    _passed(8, "CSV and model round-trips bit-exact; on-grid resample is identity; 144 slots")


def test_criterion_09_map_export():
    day = MONDAY
    directory = {i: snap(station_id=i, name=f"S{i}") for i in (1, 2, 3)}
    flows = [
        FlowSummary(1, day, 60, 40),  # max traffic 100
        FlowSummary(2, day, 20, 5),
        FlowSummary(3, day, 0, 0),
    ]
    doc = export_map(flows, directory)
    validate_geojson(doc)
    radii = {f["properties"]["station_id"]: f["properties"]["radius_px"] for f in doc["features"]}
    traffic = {f.station_id: f.traffic_level for f in flows}
    for a in traffic:
        for b in traffic:
            if traffic[a] >= traffic[b]:
                assert radii[a] >= radii[b]

    single = export_map([FlowSummary(7, day, 2, 1)], {7: snap(station_id=7)})
    validate_geojson(single)
    assert single["features"][0]["properties"]["radius_px"] == R_MAX
    assert radius_px(0, 0) == 3.0
    _passed(9, "GeoJSON structurally valid; radius monotone; single station gets r_max")


def _run_pipeline(workdir, scenario_path) -> list:
    archive = workdir / "archive.csv"
    train = workdir / "train.csv"
    new = workdir / "new.csv"
    model = workdir / "model.txt"
    tab = workdir / "tab.csv"
    report = workdir / "report.csv"
    steps = [
        ["synth", "--scenario", str(scenario_path), "--out", str(archive)],
        ["resample", "--archive", str(archive), "--station", "101",
         "--start", "2016-09-12", "--end", "2016-10-16", "--out", str(train)],
        ["resample", "--archive", str(archive), "--station", "101",
         "--start", "2016-10-17", "--end", "2016-10-30", "--out", str(new)],
        ["cluster", "--profiles", str(train), "--preset", "quiet", "--seed", "5",
         "--out", str(model)],
        ["crosstab", "--model", str(model), "--profiles", str(train),
         "--holiday", "2016-09-26", "--out", str(tab)],
        ["check", "--model", str(model), "--train-profiles", str(train),
         "--profiles", str(new), "--holiday", "2016-09-26", "--collapse-weekend",
         "--out", str(report)],
    ]
    for argv in steps:
        assert main(argv) == 0, f"pipeline step failed: {argv}"
    return [archive, train, new, model, tab, report]


def test_criterion_10_pipeline_determinism(tmp_path):
    scenario = tmp_path / "scenario.cfg"
    scenario.write_text(
        "seed = 5\nstart = 2016-09-12\nend = 2016-10-30\nholidays = 2016-09-26\n"
        "noise = 3.0\nstation = 101 commuter_rail 53.3465 -6.2929 Terminus West\n",
        encoding="utf-8",
    )
    dir_a, dir_b = tmp_path / "run_a", tmp_path / "run_b"
    dir_a.mkdir(), dir_b.mkdir()
    files_a = _run_pipeline(dir_a, scenario)
    files_b = _run_pipeline(dir_b, scenario)
    for fa, fb in zip(files_a, files_b):
        assert filecmp.cmp(fa, fb, shallow=False), f"{fa.name} differs between runs"
        assert fa.read_bytes() == fb.read_bytes()
    _passed(10, "synth -> cluster -> crosstab -> check byte-identical across two runs")
