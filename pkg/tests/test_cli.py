import json

from velostat.cli import main
from velostat.cluster import load_model_file
from velostat.flows import read_flows_csv
from velostat.ingest import read_archive, write_archive

from conftest import archive_of, snap
from test_mapexport import validate_geojson


def write_scenario(tmp_path, noise="2.0", name="scenario.cfg"):
    path = tmp_path / name
    path.write_text(
        "seed = 7\n"
        "start = 2016-09-12\n"
        "end = 2016-10-16\n"
        "holidays = 2016-09-26\n"
        f"noise = {noise}\n"
        "station = 101 commuter_rail 53.3465 -6.2929 Terminus West\n"
        "station = 202 mixed_residential_business 53.3318 -6.2606 Canal Quarter\n",
        encoding="utf-8",
    )
    return path


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestPipeline:
    def test_synth_resample_cluster_crosstab_check(self, tmp_path, capsys):
        scenario = write_scenario(tmp_path)
        archive = tmp_path / "archive.csv"
        code, _, err = run(["synth", "--scenario", str(scenario), "--out", str(archive)], capsys)
        assert code == 0, err
        # 2 stations x 35 days x 144 slots
        assert "wrote 10080 rows" in err

        train = tmp_path / "train.csv"
        code, _, err = run(
            ["resample", "--archive", str(archive), "--station", "101",
             "--start", "2016-09-12", "--end", "2016-10-09", "--out", str(train)],
            capsys,
        )
        assert code == 0, err
        assert "28 profiles" in err

        model_path = tmp_path / "model.txt"
        code, _, err = run(
            ["cluster", "--profiles", str(train), "--preset", "quiet",
             "--seed", "5", "--out", str(model_path)],
            capsys,
        )
        assert code == 0, err
        model = load_model_file(model_path)
        assert model.k == 2

        tab_path = tmp_path / "tab.csv"
        code, out, err = run(
            ["crosstab", "--model", str(model_path), "--profiles", str(train),
             "--holiday", "2016-09-26", "--out", str(tab_path), "--text"],
            capsys,
        )
        assert code == 0, err
        rows = tab_path.read_text().splitlines()[1:]
        cells = [list(map(int, r.split(",")[1:])) for r in rows]
        weekend_row = next(r for r in cells if r[5] > 0)
        weekday_row = next(r for r in cells if r is not weekend_row)
        # weekend cluster: 4 Saturdays, 4 Sundays, plus the holiday Monday
        assert weekend_row == [1, 0, 0, 0, 0, 4, 4]
        assert sum(weekday_row[:5]) == 19 and sum(weekday_row[5:]) == 0
        assert "holiday: 2016-09-26" in out

        new = tmp_path / "new.csv"
        code, _, err = run(
            ["resample", "--archive", str(archive), "--station", "101",
             "--start", "2016-10-10", "--end", "2016-10-16", "--out", str(new)],
            capsys,
        )
        assert code == 0, err
        report_path = tmp_path / "report.csv"
        code, out, err = run(
            ["check", "--model", str(model_path), "--train-profiles", str(train),
             "--profiles", str(new), "--holiday", "2016-09-26",
             "--collapse-weekend", "--out", str(report_path)],
            capsys,
        )
        assert code == 0, err
        assert "match rate: 1.0000" in out

    def test_flows_and_export_map(self, tmp_path, capsys):
        scenario = write_scenario(tmp_path)
        archive = tmp_path / "archive.csv"
        assert run(["synth", "--scenario", str(scenario), "--out", str(archive)], capsys)[0] == 0

        profiles = {}
        for station in ("101", "202"):
            profiles[station] = tmp_path / f"profiles_{station}.csv"
            code, _, err = run(
                ["resample", "--archive", str(archive), "--station", station,
                 "--start", "2016-09-12", "--end", "2016-09-18",
                 "--out", str(profiles[station])],
                capsys,
            )
            assert code == 0, err

        merged = tmp_path / "profiles.csv"
        merged.write_text(
            profiles["101"].read_text()
            + "".join(profiles["202"].read_text().splitlines(keepends=True)[1:]),
            encoding="utf-8",
        )
        flows_path = tmp_path / "flows.csv"
        code, out, err = run(
            ["flows", "--profiles", str(merged), "--out", str(flows_path),
             "--rank", "2016-09-12"],
            capsys,
        )
        assert code == 0, err
        lines = out.splitlines()
        assert lines[0] == "station_id,traffic_level"
        assert len(lines) == 3
        table = read_flows_csv(flows_path)
        assert len(table) == 14

        map_path = tmp_path / "map.geojson"
        html_path = tmp_path / "map.html"
        code, _, err = run(
            ["export-map", "--flows", str(flows_path), "--date", "2016-09-12",
             "--archive", str(archive), "--out", str(map_path),
             "--html", str(html_path)],
            capsys,
        )
        assert code == 0, err
        doc = json.loads(map_path.read_text())
        validate_geojson(doc)
        assert len(doc["features"]) == 2
        assert max(f["properties"]["radius_px"] for f in doc["features"]) == 30.0
        assert "<svg" in html_path.read_text()

    def test_cluster_sweep(self, tmp_path, capsys):
        scenario = write_scenario(tmp_path)
        archive = tmp_path / "archive.csv"
        run(["synth", "--scenario", str(scenario), "--out", str(archive)], capsys)
        train = tmp_path / "train.csv"
        run(
            ["resample", "--archive", str(archive), "--station", "101",
             "--start", "2016-09-12", "--end", "2016-10-09", "--out", str(train)],
            capsys,
        )
        code, out, err = run(
            ["cluster", "--profiles", str(train), "--k", "2", "--sweep", "1:4"],
            capsys,
        )
        assert code == 0, err
        lines = out.splitlines()
        assert lines[0] == "k,inertia"
        inertias = [float(line.split(",")[1]) for line in lines[1:]]
        assert len(inertias) == 4
        drops = [
            (a - b) / a if a else 0.0 for a, b in zip(inertias, inertias[1:])
        ]
        assert max(range(len(drops)), key=drops.__getitem__) == 0  # k=1 -> k=2


class TestImport:
    def test_merge_json_and_csv(self, tmp_path, capsys):
        feed = tmp_path / "feed.json"
        feed.write_text(
            json.dumps(
                [
                    {
                        "number": 7,
                        "name": "Spencer Dock",
                        "position": {"lat": 53.35, "lng": -6.24},
                        "bike_stands": 30,
                        "available_bike_stands": 20,
                        "available_bikes": 10,
                        "last_update": 1473753000000,
                    }
                ]
            ),
            encoding="utf-8",
        )
        csv_in = tmp_path / "old.csv"
        write_archive(archive_of(snap(station_id=3)), csv_in)
        out = tmp_path / "merged.csv"
        code, _, err = run(
            ["import", str(feed), str(csv_in), "--out", str(out)], capsys
        )
        assert code == 0, err
        merged, _ = read_archive(out)
        assert merged.station_ids == (3, 7)

    def test_import_is_dedup_idempotent(self, tmp_path, capsys):
        csv_in = tmp_path / "old.csv"
        write_archive(archive_of(snap(station_id=3)), csv_in)
        out = tmp_path / "merged.csv"
        code, _, err = run(["import", str(csv_in), str(csv_in), "--out", str(out)], capsys)
        assert code == 0
        assert "1 duplicates" in err
        merged, _ = read_archive(out)
        assert len(merged.rows) == 1


class TestExitCodes:
    def test_infeasible_k_exits_one(self, tmp_path, capsys):
        scenario = write_scenario(tmp_path)
        archive = tmp_path / "archive.csv"
        run(["synth", "--scenario", str(scenario), "--out", str(archive)], capsys)
        train = tmp_path / "train.csv"
        run(
            ["resample", "--archive", str(archive), "--station", "101",
             "--start", "2016-09-12", "--end", "2016-09-13", "--out", str(train)],
            capsys,
        )
        code, _, err = run(
            ["cluster", "--profiles", str(train), "--k", "40",
             "--out", str(tmp_path / "m.txt")],
            capsys,
        )
        assert code == 1
        assert "k=40" in err

    def test_unknown_station_exits_one(self, tmp_path, capsys):
        scenario = write_scenario(tmp_path)
        archive = tmp_path / "archive.csv"
        run(["synth", "--scenario", str(scenario), "--out", str(archive)], capsys)
        code, _, err = run(
            ["resample", "--archive", str(archive), "--station", "999",
             "--start", "2016-09-12", "--end", "2016-09-13",
             "--out", str(tmp_path / "p.csv")],
            capsys,
        )
        assert code == 1
        assert "999" in err

    def test_missing_file_exits_two(self, tmp_path, capsys):
        code, _, err = run(
            ["flows", "--profiles", str(tmp_path / "nope.csv"),
             "--out", str(tmp_path / "f.csv")],
            capsys,
        )
        assert code == 2

    def test_usage_error_exits_one(self, tmp_path, capsys):
        code, _, err = run(["cluster", "--profiles"], capsys)
        assert code == 1

    def test_malformed_data_file_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "profiles.csv"
        bad.write_text("station_id,date,slot_index,value,flag\n1,not-a-date,0,1,direct\n")
        code, _, err = run(
            ["flows", "--profiles", str(bad), "--out", str(tmp_path / "f.csv")], capsys
        )
        assert code == 1
        assert "error" in err

    def test_fetch_without_key_exits_one(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("VELOSTAT_API_KEY", raising=False)
        code, _, err = run(
            ["fetch", "--endpoint", "http://feed", "--out", str(tmp_path / "a.csv")],
            capsys,
        )
        assert code == 1
        assert "VELOSTAT_API_KEY" in err


class TestConfigFile:
    def test_config_supplies_holidays(self, tmp_path, capsys):
        scenario = write_scenario(tmp_path)
        archive = tmp_path / "archive.csv"
        run(["synth", "--scenario", str(scenario), "--out", str(archive)], capsys)
        train = tmp_path / "train.csv"
        run(
            ["resample", "--archive", str(archive), "--station", "101",
             "--start", "2016-09-12", "--end", "2016-10-09", "--out", str(train)],
            capsys,
        )
        model_path = tmp_path / "model.txt"
        run(
            ["cluster", "--profiles", str(train), "--preset", "quiet",
             "--seed", "5", "--out", str(model_path)],
            capsys,
        )
        cfg = tmp_path / "velostat.cfg"
        cfg.write_text("holidays = 2016-09-26\n", encoding="utf-8")
        tab_path = tmp_path / "tab.csv"
        code, out, err = run(
            ["--config", str(cfg), "crosstab", "--model", str(model_path),
             "--profiles", str(train), "--out", str(tab_path), "--text"],
            capsys,
        )
        assert code == 0, err
        assert "holiday: 2016-09-26" in out

    def test_bad_config_key_exits_one(self, tmp_path, capsys):
        cfg = tmp_path / "velostat.cfg"
        cfg.write_text("zoon = Europe/Dublin\n", encoding="utf-8")
        code, _, err = run(
            ["--config", str(cfg), "flows", "--profiles", "x", "--out", "y"], capsys
        )
        assert code == 1
        assert "zoon" in err

    def test_shipped_sample_config_loads(self, capsys, tmp_path):
        from velostat.config import load_pipeline_config

        cfg = load_pipeline_config("configs/velostat.cfg")
        assert cfg.zone == "Europe/Dublin"
        assert len(cfg.holidays) == 9
