"""State fusion: a bounded-noise dead-reckoning model standing in for the IMU
state estimator, and the particle filter that smooths localization fixes
between camera frames.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .geometry import Pose2D, PoseMetric, wrap_angle


@dataclass(frozen=True, slots=True)
class OdometryModel:
    """Uniform per-step noise bounds on integrated motion increments."""

    position_noise: float = 0.02   # meters, per component per step
    heading_noise: float = 0.02    # radians per step
    step_interval: float = 0.01    # seconds

    def __post_init__(self) -> None:
        if self.position_noise < 0.0 or self.heading_noise < 0.0:
            raise ValueError("noise bounds must be nonnegative")
        if self.step_interval <= 0.0:
            raise ValueError("step interval must be positive")


def dead_reckon(model: OdometryModel, true_delta: Pose2D, rng: np.random.Generator) -> Pose2D:
    """One odometry step: the true increment perturbed by bounded uniform noise."""
    px = model.position_noise
    ph = model.heading_noise
    return Pose2D(
        true_delta.x + rng.uniform(-px, px),
        true_delta.y + rng.uniform(-px, px),
        true_delta.theta + rng.uniform(-ph, ph),
    )


@dataclass(frozen=True, slots=True)
class Particle:
    pose: Pose2D
    weight: float


class ParticleFilter:
    """Fixed-size particle set fusing odometry-rate motion with pose fixes.

    Weights stay normalized after every update; systematic resampling fires
    when the effective sample size drops below ``resample_threshold * n``.
    """

    def __init__(
        self,
        initial_pose: Pose2D,
        count: int = 300,
        kernel_width: float = 0.5,
        resample_threshold: float = 0.5,
        position_jitter: float = 0.01,
        heading_jitter: float = 0.01,
        metric: Optional[PoseMetric] = None,
    ):
        if count < 1:
            raise ValueError("particle count must be positive")
        if kernel_width <= 0.0:
            raise ValueError("kernel width must be positive")
        if not 0.0 < resample_threshold <= 1.0:
            raise ValueError("resample threshold must be in (0, 1]")
        self.count = count
        self.kernel_width = kernel_width
        self.resample_threshold = resample_threshold
        self.position_jitter = position_jitter
        self.heading_jitter = heading_jitter
        self.metric = metric or PoseMetric()
        self.x = np.full(count, initial_pose.x)
        self.y = np.full(count, initial_pose.y)
        self.theta = np.full(count, initial_pose.theta)
        self.weights = np.full(count, 1.0 / count)
        self.underflow_events = 0
        self.resample_events = 0

    @property
    def particles(self) -> List[Particle]:
        return [
            Particle(Pose2D(float(x), float(y), float(t)), float(w))
            for x, y, t, w in zip(self.x, self.y, self.theta, self.weights)
        ]

    @property
    def ess(self) -> float:
        return 1.0 / float((self.weights**2).sum())

    def predict(self, velocity: Tuple[float, float, float], dt: float, rng: np.random.Generator) -> None:
        """Propagate each particle by body-frame velocity plus uniform jitter."""
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        vx, vy, omega = velocity
        n = self.count
        jp = self.position_jitter
        jh = self.heading_jitter
        dx = vx * dt + rng.uniform(-jp, jp, n)
        dy = vy * dt + rng.uniform(-jp, jp, n)
        dtheta = omega * dt + rng.uniform(-jh, jh, n)
        c = np.cos(self.theta)
        s = np.sin(self.theta)
        self.x += c * dx - s * dy
        self.y += s * dx + c * dy
        self.theta = np.pi - (np.pi - (self.theta + dtheta)) % (2.0 * np.pi)

    def update(self, measurement: Pose2D, rng: np.random.Generator) -> None:
        """Reweight by a squared-exponential kernel of pose distance to the fix."""
        dx = self.x - measurement.x
        dy = self.y - measurement.y
        dth = (np.pi - (np.pi - (self.theta - measurement.theta)) % (2.0 * np.pi)) * self.metric.theta_weight
        d2 = dx * dx + dy * dy + dth * dth
        self.weights = self.weights * np.exp(-0.5 * d2 / (self.kernel_width**2))
        total = float(self.weights.sum())
        if total <= 0.0 or not math.isfinite(total):
            self.weights = np.full(self.count, 1.0 / self.count)
            self.underflow_events += 1
            return
        self.weights /= total
        if self.ess < self.resample_threshold * self.count:
            self.resample(rng)

    def estimate(self) -> Pose2D:
        """Weighted mean position and weighted circular mean heading."""
        w = self.weights
        theta = math.atan2(float((w * np.sin(self.theta)).sum()), float((w * np.cos(self.theta)).sum()))
        return Pose2D(float((w * self.x).sum()), float((w * self.y).sum()), wrap_angle(theta))

    def resample(self, rng: np.random.Generator) -> None:
        """Systematic low-variance resampling; weights reset to uniform."""
        n = self.count
        positions = (rng.random() + np.arange(n)) / n
        cumulative = np.cumsum(self.weights)
        cumulative[-1] = 1.0
        idx = np.searchsorted(cumulative, positions, side="left")
        self.x = self.x[idx].copy()
        self.y = self.y[idx].copy()
        self.theta = self.theta[idx].copy()
        self.weights = np.full(n, 1.0 / n)
        self.resample_events += 1
