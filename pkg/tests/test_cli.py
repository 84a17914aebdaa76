"""CLI surface: flags, diagnostics, exit codes, and golden outputs."""
import json
from pathlib import Path

from click.testing import CliRunner
from fastapi.testclient import TestClient

from haris.alpr import Sighting
from haris.backend import PlateStore
from haris.cli import build_server_app, main
from haris.detect_eval import (
    DetectionRecord,
    GroundTruthRecord,
    write_detections_csv,
    write_ground_truth_csv,
)
from haris.geo import GeoPoint, GeoReference, to_gps
from haris.geometry import Point2D, Pose2D
from haris.mission import Mission, load_mission_file, save_mission_file
from haris.sim import load_world, save_world
from haris.worldgen import corridor_world

FIXTURES = Path(__file__).parent / "fixtures"


def invoke(*args, env=None):
    return CliRunner().invoke(main, [str(a) for a in args], env=env)


def write_corridor(tmp_path) -> Path:
    path = tmp_path / "world.json"
    save_world(corridor_world(), path)
    return path


def write_mission(tmp_path, world, points, name="mission.json") -> Path:
    ref = world.geo_reference()
    wps = tuple(to_gps(ref, Point2D(x, y)) for x, y in points)
    path = tmp_path / name
    save_mission_file(Mission(id="m", waypoints=wps), path)
    return path


class TestRun:
    def test_no_mission_single_tick(self, tmp_path):
        world = write_corridor(tmp_path)
        out = tmp_path / "out"
        r = invoke("run", "--world", world, "--duration", 0.05,
                   "--dt", 0.05, "--out", out)
        assert r.exit_code == 0, r.output
        assert "phase: idle" in r.output
        assert len((out / "trajectory.csv").read_text().splitlines()) == 2

    def test_completed_mission_exits_zero(self, tmp_path):
        world_path = write_corridor(tmp_path)
        mission = write_mission(tmp_path, load_world(world_path), [(5.0, 6.0)])
        r = invoke("run", "--world", world_path, "--mission", mission,
                   "--seed", 3, "--speed", 1.0, "--duration", 60)
        assert r.exit_code == 0, r.output
        assert "phase: completed" in r.output

    def test_malformed_world_names_field(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"bounds": [0, 0, 5, 5]}))
        r = invoke("run", "--world", bad)
        assert r.exit_code == 1
        assert "station" in r.output

    def test_malformed_mission_names_field(self, tmp_path):
        world = write_corridor(tmp_path)
        bad = tmp_path / "bad_mission.json"
        bad.write_text(json.dumps({"id": "m"}))
        r = invoke("run", "--world", world, "--mission", bad)
        assert r.exit_code == 1
        assert "waypoints" in r.output

    def test_unknown_mode_rejected(self, tmp_path):
        world = write_corridor(tmp_path)
        r = invoke("run", "--world", world, "--mode", "teleport")
        assert r.exit_code == 2

    def test_nonpositive_dt_rejected(self, tmp_path):
        world = write_corridor(tmp_path)
        r = invoke("run", "--world", world, "--dt", 0)
        assert r.exit_code == 2
        assert "dt" in r.output


class TestExperiment:
    def test_writes_csv_with_both_modes(self, tmp_path):
        out = tmp_path / "exp"
        r = invoke("experiment", "--speeds", "1.0", "--seeds", "1",
                   "--out", out)
        assert r.exit_code == 0, r.output
        lines = (out / "path_error.csv").read_text().splitlines()
        assert lines[0] == "mode,speed,rms"
        assert len(lines) == 3
        rms = {row.split(",")[0]: float(row.split(",")[2]) for row in lines[1:]}
        assert rms["fused"] < rms["gps_only"]

    def test_bad_speed_list_rejected(self, tmp_path):
        r = invoke("experiment", "--speeds", "fast", "--out", tmp_path)
        assert r.exit_code == 2
        assert "--speeds" in r.output


class TestEval:
    def test_bundled_fixture_matches_golden_bytes(self, tmp_path):
        golden = (FIXTURES / "eval_report_golden.csv").read_text()
        out = tmp_path / "report.csv"
        r = invoke("eval", FIXTURES / "eval_detections.csv",
                   FIXTURES / "eval_groundtruth.csv", "--out", out)
        assert r.exit_code == 0, r.output
        assert r.output == golden
        assert out.read_text() == golden

    def test_ground_truth_as_detections_scores_ones(self, tmp_path):
        gts = [GroundTruthRecord("f0", "car", (i * 50.0, 0, 20, 20))
               for i in range(3)]
        dets = [DetectionRecord(g.frame_id, g.label, g.bbox, 1.0) for g in gts]
        dpath, gpath = tmp_path / "d.csv", tmp_path / "g.csv"
        write_detections_csv(dpath, dets)
        write_ground_truth_csv(gpath, gts)
        r = invoke("eval", dpath, gpath)
        assert r.exit_code == 0
        for line in r.output.splitlines()[1:]:
            cells = line.split(",")
            assert cells[3] == cells[4] == cells[5] == "1.0000"

    def test_unknown_class_names_row(self, tmp_path):
        dets = [DetectionRecord("f0", "car", (0, 0, 10, 10), 0.9),
                DetectionRecord("f0", "plane", (50, 0, 10, 10), 0.8)]
        gts = [GroundTruthRecord("f0", "car", (0, 0, 10, 10))]
        dpath, gpath = tmp_path / "d.csv", tmp_path / "g.csv"
        write_detections_csv(dpath, dets)
        write_ground_truth_csv(gpath, gts)
        r = invoke("eval", dpath, gpath)
        assert r.exit_code == 1
        assert "row 3" in r.output and "plane" in r.output

    def test_missing_column_named(self, tmp_path):
        dpath = tmp_path / "d.csv"
        dpath.write_text("frame_id,cls,x,y,w,h,confidence\nf0,car,0,0,1,1,0.5\n")
        gpath = tmp_path / "g.csv"
        write_ground_truth_csv(gpath, [GroundTruthRecord("f0", "car",
                                                         (0, 0, 10, 10))])
        r = invoke("eval", dpath, gpath)
        assert r.exit_code == 1
        assert "class" in r.output

    def test_pr_curve_export(self, tmp_path):
        pr = tmp_path / "pr.csv"
        r = invoke("eval", FIXTURES / "eval_detections.csv",
                   FIXTURES / "eval_groundtruth.csv", "--pr-out", pr)
        assert r.exit_code == 0
        lines = pr.read_text().splitlines()
        assert lines[0] == "class,recall,precision"
        assert len(lines) > 4


class TestGenworld:
    def test_one_by_one_has_single_car(self, tmp_path):
        out = tmp_path / "w.json"
        r = invoke("genworld", 1, 1, "--out", out)
        assert r.exit_code == 0, r.output
        assert len(load_world(out).parked_cars) == 1

    def test_same_seed_identical_bytes(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert invoke("genworld", 2, 3, "--seed", 7, "--out", a).exit_code == 0
        assert invoke("genworld", 2, 3, "--seed", 7, "--out", b).exit_code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_invalid_dimensions_rejected(self, tmp_path):
        r = invoke("genworld", 0, 3, "--out", tmp_path / "w.json")
        assert r.exit_code == 2

    def test_mission_out_loads(self, tmp_path):
        w, m = tmp_path / "w.json", tmp_path / "m.json"
        r = invoke("genworld", 1, 2, "--out", w, "--mission-out", m)
        assert r.exit_code == 0, r.output
        assert len(load_mission_file(m).waypoints) >= 1


class TestServe:
    def test_app_restores_journal_and_serves(self, tmp_path):
        ref = GeoReference(GeoPoint(25.0, 51.0), 0.0)
        journal = tmp_path / "journal.jsonl"
        seed_store = PlateStore(ref, journal_path=journal)
        seed_store.upsert_sighting(Sighting(
            plate_read="AB123", true_plate="AB123", confidence=0.9,
            robot_pose=Pose2D(0, 0, 0),
            car_position=to_gps(ref, Point2D(3.0, 4.0)), timestamp=5))

        app = build_server_app(world_path=None, journal_path=journal)
        client = TestClient(app)
        hit = client.get("/api/cars/AB123")
        assert hit.status_code == 200
        assert hit.json()["plate"] == "AB123"
        assert client.get("/api/cars/ZZ999").status_code == 404
        state = client.get("/api/robot/state").json()
        assert state["geo_reference"]["lat"] == 25.0
        assert client.get("/api/missions").json() == []

    def test_world_supplies_reference(self, tmp_path):
        world_path = write_corridor(tmp_path)
        world = load_world(world_path)
        app = build_server_app(world_path=world_path, journal_path=None)
        state = TestClient(app).get("/api/robot/state").json()
        assert state["geo_reference"]["lat"] == world.geo_reference().origin.lat


class TestLogLevelEnv:
    def test_invalid_level_rejected(self, tmp_path):
        r = invoke("genworld", 1, 1, "--out", tmp_path / "w.json",
                   env={"HARIS_LOG_LEVEL": "loud"})
        assert r.exit_code == 2
        assert "HARIS_LOG_LEVEL" in r.output

    def test_debug_level_accepted(self, tmp_path):
        r = invoke("genworld", 1, 1, "--out", tmp_path / "w.json",
                   env={"HARIS_LOG_LEVEL": "debug"})
        assert r.exit_code == 0
