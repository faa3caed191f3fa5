"""FastAPI service wrapping the localization package.

Estimator sessions are long-lived server-side state machines driven one frame
at a time; simulation and experiment endpoints are synchronous jobs returning
their artifacts inline.
"""
from __future__ import annotations

import math
import tempfile
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import plots
from ..config import estimator_config_from_mapping
from ..estimator import ClapEstimator
from ..experiments import ExperimentSpec, noise_setup, run_experiment
from ..field_map import (
    BodyLandmark,
    FieldMap,
    LandmarkLabel,
    MapError,
    default_adult_field,
    dump_field_map,
    load_field_map,
)
from ..fusion import ParticleFilter
from ..geometry import Pose2D
from ..metrics import DivergenceSpec, JumpSpec, RunRecord, compute_metrics
from ..simulator import SensorSpec, TrajectoryError, TrajectorySpec, simulate
from . import schemas

__all__ = ["create_app"]


def _pose(model: schemas.PoseModel) -> Pose2D:
    return Pose2D(model.x, model.y, model.theta)


def _pose_model(pose: Pose2D) -> schemas.PoseModel:
    return schemas.PoseModel(x=pose.x, y=pose.y, theta=pose.theta)


def _observations(models) -> list[BodyLandmark]:
    return [BodyLandmark(LandmarkLabel(m.label), (m.x, m.y)) for m in models]


def _trajectory(model: schemas.TrajectoryModel) -> TrajectorySpec:
    return TrajectorySpec(
        kind=model.kind,
        waypoints=tuple(tuple(w) for w in model.waypoints),
        speed=model.speed,
        heading_policy=model.heading_policy,
        fixed_heading=model.fixed_heading,
        laps=model.laps,
    )


def _sensor(model: schemas.SensorModel) -> SensorSpec:
    return SensorSpec(
        fov=math.radians(model.fov_deg),
        max_range=model.max_range,
        max_landmarks=model.max_landmarks,
        frame_rate=model.frame_rate,
    )


def _map_response(fmap: FieldMap) -> schemas.MapResponse:
    return schemas.MapResponse(
        landmarks=[
            schemas.LandmarkModel(id=lm.id, label=lm.label.value, x=lm.position[0], y=lm.position[1])
            for lm in fmap.landmarks
        ],
        unordered_pair_count=fmap.unordered_pair_count,
        text=dump_field_map(fmap),
    )


@dataclass
class _Session:
    estimator: ClapEstimator
    fuser: Optional[ParticleFilter]
    rng: np.random.Generator
    lock: threading.Lock


def create_app() -> FastAPI:
    app = FastAPI(title="claploc", version="0.1.0")
    sessions: Dict[str, _Session] = {}
    sessions_lock = threading.Lock()

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/maps/default", response_model=schemas.MapResponse)
    def maps_default() -> schemas.MapResponse:
        return _map_response(default_adult_field())

    @app.post("/maps/parse", response_model=schemas.MapResponse)
    def maps_parse(req: schemas.MapParseRequest) -> schemas.MapResponse:
        try:
            return _map_response(load_field_map(req.text))
        except MapError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.post("/sessions", response_model=schemas.SessionCreateResponse)
    def create_session(req: schemas.SessionCreateRequest) -> schemas.SessionCreateResponse:
        try:
            fmap = load_field_map(req.map_text) if req.map_text else default_adult_field()
            cfg = estimator_config_from_mapping(req.config)
        except (MapError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        pose = _pose(req.initial_pose)
        estimator = ClapEstimator(fmap, cfg, pose)
        fuser = ParticleFilter(pose, metric=cfg.metric) if req.fuse else None
        session = _Session(
            estimator=estimator,
            fuser=fuser,
            rng=np.random.default_rng(req.fusion_seed),
            lock=threading.Lock(),
        )
        sid = uuid.uuid4().hex
        with sessions_lock:
            sessions[sid] = session
        return schemas.SessionCreateResponse(session_id=sid, pose=_pose_model(pose))

    def _get_session(sid: str) -> _Session:
        with sessions_lock:
            session = sessions.get(sid)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {sid}")
        return session

    @app.post("/sessions/{sid}/step", response_model=schemas.StepResponse)
    def step_session(sid: str, req: schemas.StepRequest) -> schemas.StepResponse:
        session = _get_session(sid)
        with session.lock:
            out = session.estimator.step(_observations(req.observations), _pose(req.odometry_delta))
            fused = None
            if session.fuser is not None:
                if req.dt > 0.0:
                    velocity = (
                        req.odometry_delta.x / req.dt,
                        req.odometry_delta.y / req.dt,
                        req.odometry_delta.theta / req.dt,
                    )
                    session.fuser.predict(velocity, req.dt, session.rng)
                if out.source != "odometry-only":
                    session.fuser.update(out.pose, session.rng)
                fused = _pose_model(session.fuser.estimate())
        return schemas.StepResponse(
            pose=_pose_model(out.pose),
            source=out.source,
            candidate_count=out.candidate_count,
            local_cluster_size=out.local_cluster_size,
            fused_pose=fused,
        )

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str) -> dict:
        with sessions_lock:
            if sessions.pop(sid, None) is None:
                raise HTTPException(status_code=404, detail=f"no session {sid}")
        return {"deleted": sid}

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate_run(req: schemas.SimulateRequest) -> schemas.SimulateResponse:
        try:
            fmap = load_field_map(req.map_text) if req.map_text else default_adult_field()
            profile, mode = noise_setup(req.noise)
            frames = simulate(
                fmap,
                _trajectory(req.trajectory),
                _sensor(req.sensor),
                profile,
                req.seed,
                noise_mode=mode,
                outlier_ratio=req.outlier_ratio,
                max_frames=req.max_frames,
            )
        except (MapError, TrajectoryError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return schemas.SimulateResponse(
            frames=[
                schemas.SimFrameModel(
                    t=fr.t,
                    gt=_pose_model(fr.gt),
                    observations=[
                        schemas.ObservationModel(label=o.label.value, x=o.position[0], y=o.position[1])
                        for o in fr.observations
                    ],
                    odometry_delta=_pose_model(fr.odometry_delta),
                )
                for fr in frames
            ]
        )

    @app.post("/experiments/run", response_model=schemas.ExperimentResponse)
    def experiments_run(req: schemas.ExperimentRequest) -> schemas.ExperimentResponse:
        try:
            estimator = (
                estimator_config_from_mapping(req.estimator_config) if req.estimator_config else None
            )
            spec = ExperimentSpec(
                trajectory=_trajectory(req.trajectory),
                sensor=_sensor(req.sensor),
                map_text=req.map_text,
                noise=req.noise,
                methods=tuple(req.methods),
                seeds=tuple(req.seeds),
                outlier_ratios=tuple(req.outlier_ratios),
                max_frames=req.max_frames,
                estimator=estimator,
                jump_spec=JumpSpec(conjunction=req.jump_conjunction),
                divergence_spec=DivergenceSpec(conjunction=req.divergence_conjunction),
                measure_timing=req.measure_timing,
            )
            cells = run_experiment(spec)
        except (MapError, TrajectoryError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return schemas.ExperimentResponse(
            cells=[
                schemas.CellModel(
                    name=cell.csv_name,
                    method=cell.method,
                    seed=cell.seed,
                    outlier_ratio=cell.outlier_ratio,
                    csv=cell.record.to_csv(include_timing=req.measure_timing),
                    metrics=cell.metrics.to_dict(),
                )
                for cell in cells
            ]
        )

    @app.post("/metrics", response_model=schemas.MetricsResponse)
    def metrics_compute(req: schemas.MetricsRequest) -> schemas.MetricsResponse:
        try:
            record = RunRecord.from_csv(req.csv)
            report = compute_metrics(
                record,
                JumpSpec(req.jump_linear, req.jump_angular, req.jump_conjunction),
                DivergenceSpec(
                    req.divergence_position, req.divergence_orientation, req.divergence_conjunction
                ),
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return schemas.MetricsResponse(metrics=report.to_dict())

    @app.post("/plots", response_model=schemas.PlotResponse)
    def plots_render(req: schemas.PlotRequest) -> schemas.PlotResponse:
        with tempfile.TemporaryDirectory() as tmp:
            in_dir = Path(tmp) / "in"
            out_dir = Path(tmp) / "out"
            in_dir.mkdir()
            for cell in req.cells:
                (in_dir / cell.name).write_text(cell.csv)
            try:
                written = plots.plot_directory(in_dir, out_dir)
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            return schemas.PlotResponse(files={p.name: p.read_text() for p in written})

    return app
