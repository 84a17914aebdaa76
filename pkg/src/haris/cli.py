"""Command-line entry point: scenarios, experiments, evaluation, worlds, server."""
from __future__ import annotations

import logging
import math
import os
import sys
from pathlib import Path

import click

from .backend import PlateStore
from .bus import MessageBus
from .detect_eval import (
    evaluate,
    export_pr_curve,
    read_detections_csv,
    read_ground_truth_csv,
    report_to_csv,
)
from .geo import GeoPoint, GeoReference
from .geometry import Point2D
from .mission import Mission, MissionFileError, save_mission_file
from .runner import MODES, ScenarioConfig, experiment_path_error, run_scenario
from .sim import WorldFileError, load_world, save_world
from .worldgen import CLASS_ORDER, boustrophedon_mission, corridor_world, generate_lot

LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}
REFERENCE_LENGTH = 20.0      # straight path driven by `experiment`


def _configure_logging() -> None:
    raw = os.environ.get("HARIS_LOG_LEVEL", "warn").lower()
    if raw not in LOG_LEVELS:
        raise click.UsageError(
            f"HARIS_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}; got {raw!r}")
    logging.basicConfig(level=LOG_LEVELS[raw],
                        format="%(levelname)s %(name)s: %(message)s")


@click.group()
def main() -> None:
    """Parking-patrol robot: simulator, experiments, and backend services."""
    _configure_logging()


# ---------------------------------------------------------------------------
# run

@main.command()
@click.option("--world", "world_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="World file to simulate.")
@click.option("--mission", "mission_path",
              type=click.Path(exists=True, dir_okay=False),
              help="Mission file with GPS waypoints.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--mode", default="fused", show_default=True,
              type=click.Choice(MODES))
@click.option("--speed", default=0.5, show_default=True, type=float,
              help="Cruise speed in m/s.")
@click.option("--duration", default=300.0, show_default=True, type=float,
              help="Simulated-time budget in seconds.")
@click.option("--dt", default=0.05, show_default=True, type=float)
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              help="Directory for run artifacts.")
def run(world_path, mission_path, seed, mode, speed, duration, dt, out_dir):
    """Run one scenario; exits 0 only when the mission completes."""
    try:
        config = ScenarioConfig(world=world_path, seed=seed, duration=duration,
                                dt=dt, mode=mode, mission=mission_path,
                                out_dir=out_dir, speed=speed)
    except ValueError as e:
        raise click.UsageError(str(e)) from e
    try:
        result = run_scenario(config)
    except (WorldFileError, MissionFileError) as e:
        raise click.ClickException(str(e)) from e
    for key in ("phase", "ticks", "sim_time", "sightings",
                "unique_plates_read", "final_est_error"):
        click.echo(f"{key}: {result.metrics[key]}")
    if result.aborted_reason:
        click.echo(f"aborted_reason: {result.aborted_reason}")
    sys.exit(result.exit_code)


# ---------------------------------------------------------------------------
# experiment

def _parse_floats(raw: str, flag: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in raw.split(",") if v.strip())
    except ValueError as e:
        raise click.UsageError(f"{flag}: {e}") from e
    if not values:
        raise click.UsageError(f"{flag} needs at least one value")
    return values


@main.command()
@click.option("--world", "world_path",
              type=click.Path(exists=True, dir_okay=False),
              help="World file; defaults to the built-in empty corridor.")
@click.option("--speeds", default="0.25,0.5,1.0", show_default=True,
              help="Comma-separated speeds in m/s.")
@click.option("--seeds", default="1,2,3,4,5", show_default=True,
              help="Comma-separated seeds.")
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False),
              help="Directory for path_error.csv.")
def experiment(world_path, speeds, seeds, out_dir):
    """Compare gps_only vs fused path error on a straight reference path."""
    world = load_world(world_path) if world_path else corridor_world()
    speed_values = _parse_floats(speeds, "--speeds")
    seed_values = tuple(int(s) for s in _parse_floats(seeds, "--seeds"))
    station = world.station_pose
    a = Point2D(station.x, station.y)
    b = Point2D(station.x + REFERENCE_LENGTH * math.cos(station.theta),
                station.y + REFERENCE_LENGTH * math.sin(station.theta))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = experiment_path_error(world, (a, b), speeds=speed_values,
                                 seeds=seed_values,
                                 out_path=out / "path_error.csv")
    click.echo("mode      speed   rms")
    for r in rows:
        click.echo(f"{r.mode:<9s} {r.speed:<7.2f} {r.rms_mean:.4f}")
    click.echo(f"wrote {out / 'path_error.csv'}")


# ---------------------------------------------------------------------------
# eval

def _load_records(path: str, reader):
    try:
        return reader(path)
    except KeyError as e:
        raise click.ClickException(
            f"{path}: missing column {e.args[0]!r}") from e
    except (TypeError, ValueError) as e:
        raise click.ClickException(f"{path}: {e}") from e


def _check_labels(path: str, records) -> None:
    known = set(CLASS_ORDER)
    for i, rec in enumerate(records, start=2):   # row 1 is the header
        if rec.label not in known:
            raise click.ClickException(
                f"{path}: row {i}: unknown class {rec.label!r}")


@main.command(name="eval")
@click.argument("detections", type=click.Path(exists=True, dir_okay=False))
@click.argument("groundtruth", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="Also write the report CSV here.")
@click.option("--pr-out", "pr_path", type=click.Path(dir_okay=False),
              help="Write per-class PR-curve points here.")
def eval_cmd(detections, groundtruth, out_path, pr_path):
    """Score a detections CSV against a ground-truth CSV."""
    dets = _load_records(detections, read_detections_csv)
    gts = _load_records(groundtruth, read_ground_truth_csv)
    _check_labels(detections, dets)
    _check_labels(groundtruth, gts)
    report = evaluate(dets, gts)
    text = report_to_csv(report)
    click.echo(text, nl=False)
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    if pr_path:
        Path(pr_path).write_text(export_pr_curve(report), encoding="utf-8")


# ---------------------------------------------------------------------------
# genworld

@main.command()
@click.argument("rows", type=int)
@click.argument("cols", type=int)
@click.option("--spacing", default=3.0, show_default=True, type=float,
              help="Bay spacing in meters.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--mission-out", "mission_path",
              type=click.Path(dir_okay=False),
              help="Also write a boustrophedon coverage mission.")
def genworld(rows, cols, spacing, seed, out_path, mission_path):
    """Generate a rows x cols parking-lot world file."""
    try:
        world = generate_lot(rows, cols, spacing=spacing, seed=seed)
    except ValueError as e:
        raise click.UsageError(str(e)) from e
    save_world(world, out_path)
    click.echo(f"wrote {out_path} ({len(world.parked_cars)} cars)")
    if mission_path:
        waypoints = tuple(boustrophedon_mission(world))
        save_mission_file(Mission(id=f"coverage-{seed}", waypoints=waypoints),
                          mission_path)
        click.echo(f"wrote {mission_path} ({len(waypoints)} waypoints)")


# ---------------------------------------------------------------------------
# serve

def build_server_app(world_path=None, journal_path=None):
    """Assemble the backend app: plate store (+journal) and message bus."""
    reference = (load_world(world_path).geo_reference() if world_path
                 else GeoReference(GeoPoint(25.0, 51.0), 0.0))
    if journal_path:
        store = PlateStore.restore(reference, journal_path)
    else:
        store = PlateStore(reference)
    from .api import create_app
    return create_app(store, MessageBus())


@main.command()
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--world", "world_path",
              type=click.Path(exists=True, dir_okay=False),
              help="World file supplying the geo reference.")
@click.option("--journal", "journal_path", type=click.Path(dir_okay=False),
              help="Plate-store journal file (JSON lines, replayed if present).")
def serve(port, host, world_path, journal_path):
    """Serve the HTTP API and websocket stream."""
    import uvicorn

    try:
        app = build_server_app(world_path, journal_path)
    except WorldFileError as e:
        raise click.ClickException(str(e)) from e
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
