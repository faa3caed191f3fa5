"""Deterministic sensor-frame generator: ground-truth trajectories, FOV-limited
landmark visibility, distance-banded or flat observation noise, false-landmark
injection, and drifting dead-reckoned odometry increments.

Odometry noise is applied on its own 10 ms clock regardless of camera rate;
the event loop merges the two grids so every noise step lands exactly on a
step boundary and frame streams are bit-reproducible per seed.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .field_map import (
    DEFAULT_NOISE_BANDS,
    BodyLandmark,
    FieldMap,
    LandmarkLabel,
    MapLandmark,
    band_fraction,
)
from .fusion import OdometryModel, dead_reckon
from .geometry import (
    IDENTITY_POSE,
    Pose2D,
    compose,
    relative_pose,
    transform_world_to_body,
    wrap_angle,
)


class TrajectoryError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseProfile:
    """Sensor and odometry noise magnitudes for one simulation run."""

    bands: Tuple[Tuple[float, float], ...] = DEFAULT_NOISE_BANDS
    landmark_uniform_bound: float = 0.5
    false_positive_rate: float = 0.03
    odometry: OdometryModel = field(default_factory=OdometryModel)

    def __post_init__(self) -> None:
        uppers = [u for u, _ in self.bands]
        if any(b <= a for a, b in zip(uppers, uppers[1:])):
            raise ValueError("noise bands must be strictly increasing in distance")
        if any(not 0.0 <= f <= 0.5 for _, f in self.bands):
            raise ValueError("band fractions must lie in [0, 0.5]")
        if self.landmark_uniform_bound < 0.0 or self.false_positive_rate < 0.0:
            raise ValueError("noise magnitudes must be nonnegative")


def paper_sim_profile() -> NoiseProfile:
    """Flat +/-0.5 m landmark noise with the standard odometry drift model."""
    return NoiseProfile(landmark_uniform_bound=0.5, false_positive_rate=0.0)


def zero_noise_profile() -> NoiseProfile:
    return NoiseProfile(
        bands=((math.inf, 0.0),),
        landmark_uniform_bound=0.0,
        false_positive_rate=0.0,
        odometry=OdometryModel(0.0, 0.0, 0.01),
    )


@dataclass(frozen=True)
class SensorSpec:
    fov: float = math.radians(110.0)
    max_range: float = 14.0
    max_landmarks: int = 7
    frame_rate: float = 40.0

    def __post_init__(self) -> None:
        if not 0.0 < self.fov <= 2.0 * math.pi:
            raise ValueError("fov must be in (0, 2*pi]")
        if self.frame_rate <= 0.0 or self.max_range <= 0.0:
            raise ValueError("frame rate and max range must be positive")


HEADING_TRAVEL = "face-travel-direction"
HEADING_FIXED = "fixed"

TRAJECTORY_KINDS = ("box", "c_shape", "x_shape", "zigzag", "waypoints")

# Built-in waypoint sets on the default field (right half keeps landmarks in view).
_BOX = ((4.0, 3.0), (7.0, 3.0), (7.0, -3.0), (4.0, -3.0))
_C_SHAPE = (
    (5.5, 2.5), (4.0, 3.2), (2.5, 2.5), (1.8, 0.0), (2.5, -2.5), (4.0, -3.2), (5.5, -2.5),
)
_X_SHAPE = ((2.0, 3.0), (6.0, -3.0), (6.0, 3.0), (2.0, -3.0))
_ZIGZAG = ((1.0, -3.0), (2.2, 3.0), (3.4, -3.0), (4.6, 3.0), (5.8, -3.0))


@dataclass(frozen=True)
class TrajectorySpec:
    kind: str = "box"
    waypoints: Tuple[Tuple[float, ...], ...] = ()
    speed: float = 0.3
    heading_policy: str = HEADING_TRAVEL
    fixed_heading: float = 0.0
    laps: int = 1

    def __post_init__(self) -> None:
        if self.kind not in TRAJECTORY_KINDS:
            raise TrajectoryError(f"unknown trajectory kind {self.kind!r}")
        if self.speed <= 0.0:
            raise TrajectoryError("speed must be positive")
        if self.laps < 1:
            raise TrajectoryError("laps must be at least 1")
        if self.heading_policy not in (HEADING_TRAVEL, HEADING_FIXED):
            raise TrajectoryError(f"unknown heading policy {self.heading_policy!r}")
        if self.kind == "waypoints" and len(self.waypoints) < 2:
            raise TrajectoryError("waypoint trajectories need at least 2 waypoints")


class Trajectory:
    """Constant-speed pose-vs-time function along a polyline."""

    def __init__(self, spec: TrajectorySpec):
        self.spec = spec
        base = list(spec.waypoints) if spec.kind == "waypoints" else [
            tuple(p) for p in {"box": _BOX, "c_shape": _C_SHAPE, "x_shape": _X_SHAPE, "zigzag": _ZIGZAG}.get(spec.kind, ())
        ]
        closed = spec.kind in ("box", "x_shape")
        pts = [(p[0], p[1]) for p in base]
        for a, b in zip(pts, pts[1:]):
            if math.dist(a, b) <= 1e-12:
                raise TrajectoryError(f"zero-length segment at waypoint {a}")
        if closed and math.dist(pts[0], pts[-1]) > 1e-12:
            pts = pts + [pts[0]]

        path = list(pts)
        for _ in range(spec.laps - 1):
            if closed:
                path.extend(pts[1:])
            else:
                # open paths are walked back and forth
                path.extend(path[-2::-1][: len(pts) - 1])
        self._pts = path
        self._cum = [0.0]
        for a, b in zip(path, path[1:]):
            self._cum.append(self._cum[-1] + math.dist(a, b))
        self.length = self._cum[-1]
        if self.length <= 0.0:
            raise TrajectoryError("trajectory has zero length")
        self.duration = self.length / spec.speed

    def pose_at(self, t: float) -> Pose2D:
        s = min(max(t, 0.0) * self.spec.speed, self.length)
        k = min(bisect_right(self._cum, s), len(self._pts) - 1)
        a = self._pts[k - 1]
        b = self._pts[k]
        seg = self._cum[k] - self._cum[k - 1]
        f = (s - self._cum[k - 1]) / seg
        x = a[0] + f * (b[0] - a[0])
        y = a[1] + f * (b[1] - a[1])
        if self.spec.heading_policy == HEADING_FIXED:
            theta = self.spec.fixed_heading
        else:
            theta = math.atan2(b[1] - a[1], b[0] - a[0])
        return Pose2D(x, y, wrap_angle(theta))

    def sample(self, rate: float) -> List[Tuple[float, Pose2D]]:
        if rate <= 0.0:
            raise TrajectoryError("sample rate must be positive")
        n = int(self.duration * rate) + 1
        return [(k / rate, self.pose_at(k / rate)) for k in range(n)]


def make_trajectory(spec: TrajectorySpec, rate: float) -> List[Tuple[float, Pose2D]]:
    """Timed ground-truth pose sequence for ``spec`` sampled at ``rate`` Hz."""
    return Trajectory(spec).sample(rate)


def load_waypoints(text: str) -> Tuple[Tuple[float, ...], ...]:
    """Parse an ``x y [theta]`` waypoint document (same comment rules as maps)."""
    points = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise TrajectoryError(f"line {line_no}: expected 'x y [theta]', got {raw!r}")
        try:
            points.append(tuple(float(p) for p in parts))
        except ValueError:
            raise TrajectoryError(f"line {line_no}: bad number in {raw!r}") from None
    if len(points) < 2:
        raise TrajectoryError("waypoint file needs at least 2 points")
    return tuple(points)


def visible_landmarks(gt: Pose2D, fmap: FieldMap, sensor: SensorSpec) -> List[MapLandmark]:
    """Landmarks inside the camera wedge, nearest first, capped at the sensor limit."""
    half = sensor.fov / 2.0
    hits = []
    for lm in fmap.landmarks:
        bx, by = transform_world_to_body(gt, lm.position)
        r = math.hypot(bx, by)
        if r > sensor.max_range:
            continue
        if abs(math.atan2(by, bx)) > half:
            continue
        hits.append((r, lm.id, lm))
    hits.sort(key=lambda h: (h[0], h[1]))
    return [lm for _, _, lm in hits[: sensor.max_landmarks]]


def project_to_body(gt: Pose2D, landmarks: Sequence[MapLandmark]) -> List[BodyLandmark]:
    return [
        BodyLandmark(lm.label, transform_world_to_body(gt, lm.position)) for lm in landmarks
    ]


def apply_noise(
    landmarks: Sequence[BodyLandmark],
    profile: NoiseProfile,
    mode: str,
    rng: np.random.Generator,
) -> List[BodyLandmark]:
    """Perturb each coordinate by a bounded uniform draw; labels are kept.

    ``banded`` scales the bound with range per the perception error bands;
    ``uniform`` applies the flat simulation-validation bound.
    """
    if mode not in ("banded", "uniform"):
        raise ValueError(f"unknown noise mode {mode!r}")
    out = []
    for lm in landmarks:
        if mode == "banded":
            bound = band_fraction(lm.range, profile.bands) * lm.range
        else:
            bound = profile.landmark_uniform_bound
        out.append(
            BodyLandmark(
                lm.label,
                (
                    lm.position[0] + rng.uniform(-bound, bound),
                    lm.position[1] + rng.uniform(-bound, bound),
                ),
            )
        )
    return out


_ALL_LABELS = tuple(LandmarkLabel)


def inject_outliers(
    landmarks: Sequence[BodyLandmark],
    ratio: float,
    sensor: SensorSpec,
    rng: np.random.Generator,
) -> List[BodyLandmark]:
    """Append round(ratio * inliers) false landmarks uniform over the camera wedge."""
    if ratio < 0.0:
        raise ValueError("outlier ratio must be nonnegative")
    count = int(round(ratio * len(landmarks)))
    out = list(landmarks)
    half = sensor.fov / 2.0
    for _ in range(count):
        label = _ALL_LABELS[int(rng.integers(0, len(_ALL_LABELS)))]
        bearing = rng.uniform(-half, half)
        r = sensor.max_range * math.sqrt(rng.random())
        out.append(BodyLandmark(label, (r * math.cos(bearing), r * math.sin(bearing))))
    return out


@dataclass(frozen=True)
class SimFrame:
    t: float
    gt: Pose2D
    observations: Tuple[BodyLandmark, ...]
    odometry_delta: Pose2D


def simulate(
    fmap: FieldMap,
    traj: TrajectorySpec,
    sensor: SensorSpec,
    profile: NoiseProfile,
    seed: int,
    noise_mode: str = "banded",
    outlier_ratio: Optional[float] = None,
    max_frames: Optional[int] = None,
) -> List[SimFrame]:
    """Full sensor stream for one run; identical seeds give identical streams."""
    rng = np.random.default_rng(seed)
    trajectory = Trajectory(traj)
    ratio = profile.false_positive_rate if outlier_ratio is None else outlier_ratio

    frame_us = round(1_000_000 / sensor.frame_rate)
    odo_us = round(profile.odometry.step_interval * 1_000_000)
    if frame_us <= 0 or odo_us <= 0:
        raise ValueError("frame and odometry intervals must be positive")
    end_us = int(trajectory.duration * 1_000_000)

    frames: List[SimFrame] = []
    noisy_track = trajectory.pose_at(0.0)
    prev_truth = noisy_track
    track_at_last_frame = noisy_track
    next_frame = 0
    next_odo = odo_us
    t_us = 0

    while True:
        # advance true motion up to the next event, dead-reckoning it onto the
        # noisy track
        truth = trajectory.pose_at(t_us / 1e6)
        noisy_track = compose(noisy_track, relative_pose(prev_truth, truth))
        prev_truth = truth

        if t_us == next_odo:
            noisy_track = compose(noisy_track, dead_reckon(profile.odometry, IDENTITY_POSE, rng))
            next_odo += odo_us

        if t_us == next_frame:
            delta = relative_pose(track_at_last_frame, noisy_track) if frames else IDENTITY_POSE
            track_at_last_frame = noisy_track
            inliers = project_to_body(truth, visible_landmarks(truth, fmap, sensor))
            noisy = apply_noise(inliers, profile, noise_mode, rng)
            observations = inject_outliers(noisy, ratio, sensor, rng)
            frames.append(SimFrame(t_us / 1e6, truth, tuple(observations), delta))
            next_frame += frame_us
            if max_frames is not None and len(frames) >= max_frames:
                break

        if t_us >= end_us:
            break
        t_us = min(next_frame, next_odo, end_us)

    return frames
