"""Pydantic request/response models for the localization service."""
from __future__ import annotations

from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field


class PoseModel(BaseModel):
    x: float
    y: float
    theta: float


class ObservationModel(BaseModel):
    label: Literal["L", "T", "X", "G"]
    x: float
    y: float


class LandmarkModel(BaseModel):
    id: int
    label: str
    x: float
    y: float


class MapParseRequest(BaseModel):
    text: str


class MapResponse(BaseModel):
    landmarks: List[LandmarkModel]
    unordered_pair_count: int
    text: str


class SessionCreateRequest(BaseModel):
    map_text: Optional[str] = None
    config: Dict[str, str] = Field(default_factory=dict)
    initial_pose: PoseModel = PoseModel(x=0.0, y=0.0, theta=0.0)
    fuse: bool = False
    fusion_seed: int = 0


class SessionCreateResponse(BaseModel):
    session_id: str
    pose: PoseModel


class StepRequest(BaseModel):
    observations: List[ObservationModel] = Field(default_factory=list)
    odometry_delta: PoseModel = PoseModel(x=0.0, y=0.0, theta=0.0)
    dt: float = 0.025


class StepResponse(BaseModel):
    pose: PoseModel
    source: str
    candidate_count: int
    local_cluster_size: int
    fused_pose: Optional[PoseModel] = None


class TrajectoryModel(BaseModel):
    kind: Literal["box", "c_shape", "x_shape", "zigzag", "waypoints"] = "box"
    waypoints: List[Tuple[float, float]] = Field(default_factory=list)
    speed: float = 0.3
    heading_policy: Literal["face-travel-direction", "fixed"] = "face-travel-direction"
    fixed_heading: float = 0.0
    laps: int = 1


class SensorModel(BaseModel):
    fov_deg: float = 110.0
    max_range: float = 14.0
    max_landmarks: int = 7
    frame_rate: float = 40.0


class SimulateRequest(BaseModel):
    map_text: Optional[str] = None
    trajectory: TrajectoryModel = Field(default_factory=TrajectoryModel)
    sensor: SensorModel = Field(default_factory=SensorModel)
    noise: Literal["paper-sim", "banded", "none"] = "banded"
    outlier_ratio: Optional[float] = None
    seed: int = 0
    max_frames: Optional[int] = 200


class SimFrameModel(BaseModel):
    t: float
    gt: PoseModel
    observations: List[ObservationModel]
    odometry_delta: PoseModel


class SimulateResponse(BaseModel):
    frames: List[SimFrameModel]


class ExperimentRequest(BaseModel):
    map_text: Optional[str] = None
    trajectory: TrajectoryModel = Field(default_factory=TrajectoryModel)
    sensor: SensorModel = Field(default_factory=SensorModel)
    noise: Literal["paper-sim", "banded", "none"] = "banded"
    methods: List[Literal["clap", "mcl", "icp", "clap+pf"]] = Field(default_factory=lambda: ["clap"])
    seeds: List[int] = Field(default_factory=lambda: [0])
    outlier_ratios: List[float] = Field(default_factory=lambda: [0.0])
    max_frames: Optional[int] = None
    estimator_config: Dict[str, str] = Field(default_factory=dict)
    measure_timing: bool = False
    jump_conjunction: bool = True
    divergence_conjunction: bool = False


class CellModel(BaseModel):
    name: str
    method: str
    seed: int
    outlier_ratio: float
    csv: str
    metrics: Dict


class ExperimentResponse(BaseModel):
    cells: List[CellModel]


class MetricsRequest(BaseModel):
    csv: str
    jump_linear: float = 16.0
    jump_angular: float = 4.0
    jump_conjunction: bool = True
    divergence_position: float = 0.5
    divergence_orientation: float = 0.15
    divergence_conjunction: bool = False


class MetricsResponse(BaseModel):
    metrics: Dict


class PlotRequest(BaseModel):
    cells: List[CellModel]


class PlotResponse(BaseModel):
    files: Dict[str, str]
