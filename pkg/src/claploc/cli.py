"""Command-line client for the localization service.

All subcommands talk to the HTTP API: against a remote server when ``--server``
is given, otherwise against an in-process instance of the app. Every option can
also be supplied through a ``CLAPLOC_*`` environment variable.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click

from .config import ESTIMATOR_KEYS, env_overrides, parse_key_values

TRAJ_ALIASES = {"box": "box", "c": "c_shape", "x": "x_shape", "zigzag": "zigzag"}


def _client(server: Optional[str]):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=600.0)
    from fastapi.testclient import TestClient

    from .service.app import create_app

    return TestClient(create_app())


def _check(response):
    if response.status_code != 200:
        raise click.ClickException(f"service error {response.status_code}: {response.text}")
    return response.json()


def _trajectory_payload(traj: str, speed: float, laps: int) -> dict:
    if traj in TRAJ_ALIASES:
        return {"kind": TRAJ_ALIASES[traj], "speed": speed, "laps": laps}
    path = Path(traj)
    if not path.exists():
        raise click.ClickException(f"unknown trajectory {traj!r} (not a shape or a file)")
    from .simulator import load_waypoints

    points = [(p[0], p[1]) for p in load_waypoints(path.read_text())]
    return {"kind": "waypoints", "waypoints": points, "speed": speed, "laps": laps}


def _estimator_payload(config_path: Optional[str]) -> dict:
    mapping = {}
    if config_path:
        mapping.update(parse_key_values(Path(config_path).read_text()))
    mapping.update(env_overrides(ESTIMATOR_KEYS))
    return mapping


def _parse_list(raw: str, cast):
    return [cast(part) for part in raw.split(",") if part.strip()]


@click.group()
@click.version_option(package_name="claploc")
def main() -> None:
    """Landmark localization benchmark client."""


@main.command()
@click.option("--host", default="127.0.0.1", envvar="CLAPLOC_HOST", show_default=True)
@click.option("--port", default=8000, envvar="CLAPLOC_PORT", show_default=True, type=int)
def serve(host: str, port: int) -> None:
    """Run the localization service."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


@main.command()
@click.option("--map", "map_file", type=click.Path(exists=True), envvar="CLAPLOC_MAP", default=None)
@click.option("--traj", default="box", envvar="CLAPLOC_TRAJ", show_default=True,
              help="box|c|x|zigzag or a waypoint file")
@click.option("--methods", default="clap", envvar="CLAPLOC_METHODS", show_default=True,
              help="comma list of clap,mcl,icp,clap+pf")
@click.option("--noise", type=click.Choice(["paper-sim", "banded", "none"]), default="banded",
              envvar="CLAPLOC_NOISE", show_default=True)
@click.option("--outlier-ratio", default="0", envvar="CLAPLOC_OUTLIER_RATIO", show_default=True,
              help="comma list of false-landmark ratios")
@click.option("--seed", default="0", envvar="CLAPLOC_SEED", show_default=True,
              help="comma list of seeds")
@click.option("--frames", type=int, default=None, envvar="CLAPLOC_FRAMES")
@click.option("--speed", type=float, default=0.3, envvar="CLAPLOC_SPEED", show_default=True)
@click.option("--laps", type=int, default=1, envvar="CLAPLOC_LAPS", show_default=True)
@click.option("--fov-deg", type=float, default=110.0, envvar="CLAPLOC_FOV_DEG", show_default=True)
@click.option("--max-range", type=float, default=14.0, envvar="CLAPLOC_MAX_RANGE", show_default=True)
@click.option("--max-landmarks", type=int, default=7, envvar="CLAPLOC_MAX_LANDMARKS", show_default=True)
@click.option("--frame-rate", type=float, default=40.0, envvar="CLAPLOC_FRAME_RATE", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              envvar="CLAPLOC_CONFIG", help="estimator key=value file")
@click.option("--measure-timing", is_flag=True, envvar="CLAPLOC_MEASURE_TIMING",
              help="serialize wall-clock frame times (breaks byte determinism)")
@click.option("--jump-conjunction/--no-jump-conjunction", default=True, show_default=True)
@click.option("--divergence-conjunction/--no-divergence-conjunction", default=False, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(), envvar="CLAPLOC_OUT")
@click.option("--server", default=None, envvar="CLAPLOC_SERVER")
def run(map_file, traj, methods, noise, outlier_ratio, seed, frames, speed, laps, fov_deg,
        max_range, max_landmarks, frame_rate, config_path, measure_timing,
        jump_conjunction, divergence_conjunction, out_dir, server) -> None:
    """Run an experiment and write per-cell CSV records plus summary.json."""
    payload = {
        "map_text": Path(map_file).read_text() if map_file else None,
        "trajectory": _trajectory_payload(traj, speed, laps),
        "sensor": {
            "fov_deg": fov_deg,
            "max_range": max_range,
            "max_landmarks": max_landmarks,
            "frame_rate": frame_rate,
        },
        "noise": noise,
        "methods": _parse_list(methods, str),
        "seeds": _parse_list(seed, int),
        "outlier_ratios": _parse_list(outlier_ratio, float),
        "max_frames": frames,
        "estimator_config": _estimator_payload(config_path),
        "measure_timing": measure_timing,
        "jump_conjunction": jump_conjunction,
        "divergence_conjunction": divergence_conjunction,
    }
    with _client(server) as client:
        body = _check(client.post("/experiments/run", json=payload))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for cell in body["cells"]:
        (out / cell["name"]).write_text(cell["csv"])
        summary[cell["name"]] = {
            "method": cell["method"],
            "seed": cell["seed"],
            "outlier_ratio": cell["outlier_ratio"],
            "metrics": cell["metrics"],
        }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    click.echo(f"wrote {len(body['cells'])} runs to {out}")


@main.command()
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True), envvar="CLAPLOC_IN")
@click.option("--jump-linear", type=float, default=16.0, show_default=True)
@click.option("--jump-angular", type=float, default=4.0, show_default=True)
@click.option("--jump-conjunction/--no-jump-conjunction", default=True, show_default=True)
@click.option("--divergence-position", type=float, default=0.5, show_default=True)
@click.option("--divergence-orientation", type=float, default=0.15, show_default=True)
@click.option("--divergence-conjunction/--no-divergence-conjunction", default=False, show_default=True)
@click.option("--server", default=None, envvar="CLAPLOC_SERVER")
def metrics(in_dir, jump_linear, jump_angular, jump_conjunction, divergence_position,
            divergence_orientation, divergence_conjunction, server) -> None:
    """Recompute metrics for every run CSV in a directory."""
    csvs = sorted(Path(in_dir).glob("*.csv"))
    if not csvs:
        raise click.ClickException(f"no CSV files in {in_dir}")
    results = {}
    with _client(server) as client:
        for path in csvs:
            body = _check(
                client.post(
                    "/metrics",
                    json={
                        "csv": path.read_text(),
                        "jump_linear": jump_linear,
                        "jump_angular": jump_angular,
                        "jump_conjunction": jump_conjunction,
                        "divergence_position": divergence_position,
                        "divergence_orientation": divergence_orientation,
                        "divergence_conjunction": divergence_conjunction,
                    },
                )
            )
            results[path.name] = body["metrics"]
    for name, m in results.items():
        click.echo(
            f"{name}: pos MAE {m['position_mae']:.3f}±{m['position_std']:.3f} m, "
            f"ori MAE {m['orientation_mae_deg']:.2f}±{m['orientation_std_deg']:.2f} deg, "
            f"jumps {m['velocity_jumps']}, diverged {m['diverged_fraction']:.3f}"
        )
    target = Path(in_dir) / "metrics.json"
    target.write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")
    click.echo(f"wrote {target}")


@main.command()
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True), envvar="CLAPLOC_IN")
@click.option("--out", "out_dir", required=True, type=click.Path(), envvar="CLAPLOC_OUT")
@click.option("--server", default=None, envvar="CLAPLOC_SERVER")
def plot(in_dir, out_dir, server) -> None:
    """Render trajectory overlays and robustness bar charts as SVG files."""
    csvs = sorted(Path(in_dir).glob("*.csv"))
    if not csvs:
        raise click.ClickException(f"no CSV files in {in_dir}")
    cells = []
    for path in csvs:
        cells.append(
            {
                "name": path.name,
                "method": "",
                "seed": 0,
                "outlier_ratio": 0.0,
                "csv": path.read_text(),
                "metrics": {},
            }
        )
    with _client(server) as client:
        body = _check(client.post("/plots", json={"cells": cells}))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, svg in body["files"].items():
        (out / name).write_text(svg)
    click.echo(f"wrote {len(body['files'])} plots to {out}")


if __name__ == "__main__":
    sys.exit(main())
