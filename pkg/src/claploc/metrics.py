"""Run records and trajectory-quality metrics: MAE, velocity jumps, divergence.

A RunRecord keeps per-frame ground truth and estimates as arrays; its CSV form
is self-describing (the jump/diverged flags can be recomputed from the pose
columns).
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

CSV_HEADER = "t,gt_x,gt_y,gt_theta,est_x,est_y,est_theta,method,n_candidates,jump,diverged,frame_time_s"


def _wrap_array(theta: np.ndarray) -> np.ndarray:
    return np.pi - (np.pi - theta) % (2.0 * np.pi)


@dataclass(frozen=True)
class JumpSpec:
    """A velocity jump exceeds both speed thresholds between consecutive frames."""

    linear: float = 16.0      # m/s
    angular: float = 4.0      # rad/s
    conjunction: bool = True  # both thresholds required; False counts either

    def __post_init__(self) -> None:
        if self.linear <= 0.0 or self.angular <= 0.0:
            raise ValueError("jump thresholds must be positive")


@dataclass(frozen=True)
class DivergenceSpec:
    """A diverged frame errs beyond the position or orientation threshold."""

    position: float = 0.5      # m
    orientation: float = 0.15  # rad
    conjunction: bool = False  # False: either threshold suffices

    def __post_init__(self) -> None:
        if self.position <= 0.0 or self.orientation <= 0.0:
            raise ValueError("divergence thresholds must be positive")


@dataclass
class RunRecord:
    """Per-frame log of one (method, seed, outlier-ratio) run."""

    method: str
    t: np.ndarray
    gt: np.ndarray            # (n, 3)
    est: np.ndarray           # (n, 3)
    n_candidates: np.ndarray
    frame_time_s: np.ndarray
    jump: np.ndarray
    diverged: np.ndarray

    def __len__(self) -> int:
        return self.t.shape[0]

    @staticmethod
    def build(method: str, t, gt, est, n_candidates, frame_time_s) -> "RunRecord":
        n = len(t)
        return RunRecord(
            method=method,
            t=np.asarray(t, dtype=np.float64),
            gt=np.asarray(gt, dtype=np.float64).reshape(n, 3),
            est=np.asarray(est, dtype=np.float64).reshape(n, 3),
            n_candidates=np.asarray(n_candidates, dtype=np.int64),
            frame_time_s=np.asarray(frame_time_s, dtype=np.float64),
            jump=np.zeros(n, dtype=np.int64),
            diverged=np.zeros(n, dtype=np.int64),
        )

    def flag(self, jump_spec: JumpSpec, divergence_spec: DivergenceSpec) -> None:
        self.jump = jump_flags(self, jump_spec)
        self.diverged = divergence_flags(self, divergence_spec)

    def to_csv(self, include_timing: bool = False) -> str:
        """Serialize; timing is zeroed unless requested so that equal-seed runs
        are byte-identical."""
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for k in range(len(self)):
            ft = self.frame_time_s[k] if include_timing else 0.0
            buf.write(
                f"{self.t[k]!r},{self.gt[k, 0]!r},{self.gt[k, 1]!r},{self.gt[k, 2]!r},"
                f"{self.est[k, 0]!r},{self.est[k, 1]!r},{self.est[k, 2]!r},"
                f"{self.method},{int(self.n_candidates[k])},{int(self.jump[k])},"
                f"{int(self.diverged[k])},{ft!r}\n"
            )
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str) -> "RunRecord":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != CSV_HEADER:
            raise ValueError("unrecognized run CSV header")
        rows = [ln.split(",") for ln in lines[1:]]
        if not rows:
            raise ValueError("run CSV has no data rows")
        methods = {r[7] for r in rows}
        if len(methods) != 1:
            raise ValueError("run CSV mixes methods")
        rec = RunRecord.build(
            method=rows[0][7],
            t=[float(r[0]) for r in rows],
            gt=[[float(r[1]), float(r[2]), float(r[3])] for r in rows],
            est=[[float(r[4]), float(r[5]), float(r[6])] for r in rows],
            n_candidates=[int(r[8]) for r in rows],
            frame_time_s=[float(r[11]) for r in rows],
        )
        rec.jump = np.array([int(r[9]) for r in rows], dtype=np.int64)
        rec.diverged = np.array([int(r[10]) for r in rows], dtype=np.int64)
        return rec


def position_errors(record: RunRecord) -> np.ndarray:
    return np.hypot(record.est[:, 0] - record.gt[:, 0], record.est[:, 1] - record.gt[:, 1])


def orientation_errors(record: RunRecord) -> np.ndarray:
    return np.abs(_wrap_array(record.est[:, 2] - record.gt[:, 2]))


def mae_stats(record: RunRecord) -> Dict[str, float]:
    """Position MAE/std in meters, orientation MAE/std in degrees."""
    if len(record) == 0:
        raise ValueError("empty run record")
    pos = position_errors(record)
    ang = np.degrees(orientation_errors(record))
    return {
        "position_mae": float(pos.mean()),
        "position_std": float(pos.std()),
        "orientation_mae_deg": float(ang.mean()),
        "orientation_std_deg": float(ang.std()),
    }


def jump_flags(record: RunRecord, spec: JumpSpec) -> np.ndarray:
    """Per-frame jump markers; frame k flags the (k-1, k) transition."""
    n = len(record)
    flags = np.zeros(n, dtype=np.int64)
    if n < 2:
        return flags
    dt = np.diff(record.t)
    dt[dt <= 0.0] = np.nan
    lin = np.hypot(np.diff(record.est[:, 0]), np.diff(record.est[:, 1])) / dt
    ang = np.abs(_wrap_array(np.diff(record.est[:, 2]))) / dt
    if spec.conjunction:
        hit = (lin > spec.linear) & (ang > spec.angular)
    else:
        hit = (lin > spec.linear) | (ang > spec.angular)
    flags[1:] = np.where(np.isnan(dt), 0, hit.astype(np.int64))
    return flags


def count_velocity_jumps(record: RunRecord, spec: JumpSpec) -> int:
    return int(jump_flags(record, spec).sum())


def divergence_flags(record: RunRecord, spec: DivergenceSpec) -> np.ndarray:
    pos = position_errors(record) > spec.position
    ang = orientation_errors(record) > spec.orientation
    hit = (pos & ang) if spec.conjunction else (pos | ang)
    return hit.astype(np.int64)


def divergence_fraction(record: RunRecord, spec: DivergenceSpec) -> float:
    if len(record) == 0:
        return 0.0
    return float(divergence_flags(record, spec).mean())


@dataclass
class MetricsReport:
    """Summary of one run, including which threshold semantics were applied."""

    method: str
    frames: int
    position_mae: float
    position_std: float
    orientation_mae_deg: float
    orientation_std_deg: float
    velocity_jumps: int
    diverged_fraction: float
    mean_frame_time_s: float
    max_frame_time_s: float
    p50_frame_time_s: float
    p99_frame_time_s: float
    jump_spec: Dict = field(default_factory=dict)
    divergence_spec: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return dict(self.__dict__)


def compute_metrics(
    record: RunRecord,
    jump_spec: Optional[JumpSpec] = None,
    divergence_spec: Optional[DivergenceSpec] = None,
) -> MetricsReport:
    jump_spec = jump_spec or JumpSpec()
    divergence_spec = divergence_spec or DivergenceSpec()
    stats = mae_stats(record)
    ft = record.frame_time_s
    return MetricsReport(
        method=record.method,
        frames=len(record),
        velocity_jumps=count_velocity_jumps(record, jump_spec),
        diverged_fraction=divergence_fraction(record, divergence_spec),
        mean_frame_time_s=float(ft.mean()) if len(ft) else 0.0,
        max_frame_time_s=float(ft.max()) if len(ft) else 0.0,
        p50_frame_time_s=float(np.percentile(ft, 50)) if len(ft) else 0.0,
        p99_frame_time_s=float(np.percentile(ft, 99)) if len(ft) else 0.0,
        jump_spec={
            "linear": jump_spec.linear,
            "angular": jump_spec.angular,
            "conjunction": jump_spec.conjunction,
        },
        divergence_spec={
            "position": divergence_spec.position,
            "orientation": divergence_spec.orientation,
            "conjunction": divergence_spec.conjunction,
        },
        **stats,
    )
