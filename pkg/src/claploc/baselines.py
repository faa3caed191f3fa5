"""Comparison localizers: an augmented Monte Carlo filter and an ICP-style
iterative landmark matcher (no outlier rejection). Both consume the same
frame streams as the pair-clustering estimator.
"""
from __future__ import annotations

import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .field_map import BodyLandmark, FieldMap, LandmarkLabel
from .geometry import Pose2D, compose, wrap_angle

# caps the per-observation exponent so products of many likelihoods stay
# representable even for far-off particles
_MAX_EXPONENT = 50.0


def _wrap_array(theta: np.ndarray) -> np.ndarray:
    return np.pi - (np.pi - theta) % (2.0 * np.pi)


def _label_arrays(fmap: FieldMap) -> Dict[LandmarkLabel, np.ndarray]:
    groups: Dict[LandmarkLabel, List] = {}
    for lm in fmap.landmarks:
        groups.setdefault(lm.label, []).append(lm.position)
    return {label: np.array(pts) for label, pts in groups.items()}


def _field_bounds(fmap: FieldMap, margin: float = 1.0) -> Tuple[float, float, float, float]:
    xs = [lm.position[0] for lm in fmap.landmarks]
    ys = [lm.position[1] for lm in fmap.landmarks]
    return (min(xs) - margin, max(xs) + margin, min(ys) - margin, max(ys) + margin)


class MclBaseline:
    """Augmented MCL over the landmark map.

    Particles are weighted by the distance from each predicted observation to
    the nearest same-label landmark; the short/long-term average-weight ratio
    injects random particles when the match quality collapses.
    """

    def __init__(
        self,
        fmap: FieldMap,
        initial_pose: Optional[Pose2D] = None,
        particles: int = 500,
        sensor_sigma: float = 0.5,
        alpha_slow: float = 0.1,
        alpha_fast: float = 0.5,
        motion_position_jitter: float = 0.03,
        motion_heading_jitter: float = 0.03,
        rng: Optional[np.random.Generator] = None,
    ):
        self.fmap = fmap
        self.landmarks_by_label = _label_arrays(fmap)
        self.bounds = _field_bounds(fmap)
        self.n = particles
        self.sensor_sigma = sensor_sigma
        self.alpha_slow = alpha_slow
        self.alpha_fast = alpha_fast
        self.motion_position_jitter = motion_position_jitter
        self.motion_heading_jitter = motion_heading_jitter
        self.w_slow = 0.0
        self.w_fast = 0.0
        if initial_pose is not None:
            self.x = np.full(particles, initial_pose.x)
            self.y = np.full(particles, initial_pose.y)
            self.theta = np.full(particles, initial_pose.theta)
        else:
            if rng is None:
                raise ValueError("uniform initialization needs an rng")
            self.x, self.y, self.theta = self._random_poses(particles, rng)

    def _random_poses(self, count: int, rng: np.random.Generator):
        x0, x1, y0, y1 = self.bounds
        return (
            rng.uniform(x0, x1, count),
            rng.uniform(y0, y1, count),
            rng.uniform(-math.pi, math.pi, count),
        )

    def _propagate(self, delta: Pose2D, rng: np.random.Generator) -> None:
        jp = self.motion_position_jitter
        jh = self.motion_heading_jitter
        dx = delta.x + rng.uniform(-jp, jp, self.n)
        dy = delta.y + rng.uniform(-jp, jp, self.n)
        dth = delta.theta + rng.uniform(-jh, jh, self.n)
        c = np.cos(self.theta)
        s = np.sin(self.theta)
        self.x += c * dx - s * dy
        self.y += s * dx + c * dy
        self.theta = _wrap_array(self.theta + dth)

    def _log_likelihood(self, observations: Sequence[BodyLandmark]) -> np.ndarray:
        logw = np.zeros(self.n)
        c = np.cos(self.theta)
        s = np.sin(self.theta)
        inv = 1.0 / (2.0 * self.sensor_sigma**2)
        for obs in observations:
            pts = self.landmarks_by_label.get(obs.label)
            if pts is None:
                continue
            ox, oy = obs.position
            wx = self.x + c * ox - s * oy
            wy = self.y + s * ox + c * oy
            d2 = (wx[:, None] - pts[:, 0]) ** 2 + (wy[:, None] - pts[:, 1]) ** 2
            logw -= np.minimum(d2.min(axis=1) * inv, _MAX_EXPONENT)
        return logw

    def _mean_pose(self, weights: np.ndarray) -> Pose2D:
        theta = math.atan2(
            float((weights * np.sin(self.theta)).sum()),
            float((weights * np.cos(self.theta)).sum()),
        )
        return Pose2D(
            float((weights * self.x).sum()), float((weights * self.y).sum()), wrap_angle(theta)
        )

    def step(
        self,
        observations: Sequence[BodyLandmark],
        odometry_delta: Pose2D,
        rng: np.random.Generator,
    ) -> Pose2D:
        self._propagate(odometry_delta, rng)
        if not observations:
            return self._mean_pose(np.full(self.n, 1.0 / self.n))

        logw = self._log_likelihood(observations)
        raw = np.exp(logw)
        w_avg = float(raw.mean())
        total = float(raw.sum())
        weights = raw / total if total > 0.0 else np.full(self.n, 1.0 / self.n)

        if self.w_slow == 0.0:
            self.w_slow = w_avg
            self.w_fast = w_avg
        else:
            self.w_slow += self.alpha_slow * (w_avg - self.w_slow)
            self.w_fast += self.alpha_fast * (w_avg - self.w_fast)
        p_inject = max(0.0, 1.0 - self.w_fast / self.w_slow) if self.w_slow > 0.0 else 0.0

        estimate = self._mean_pose(weights)

        # systematic resampling with random-particle augmentation
        positions = (rng.random() + np.arange(self.n)) / self.n
        cumulative = np.cumsum(weights)
        cumulative[-1] = 1.0
        idx = np.searchsorted(cumulative, positions, side="left")
        self.x = self.x[idx].copy()
        self.y = self.y[idx].copy()
        self.theta = self.theta[idx].copy()
        n_random = int(p_inject * self.n)
        if n_random > 0:
            rx, ry, rtheta = self._random_poses(n_random, rng)
            sel = rng.choice(self.n, size=n_random, replace=False)
            self.x[sel] = rx
            self.y[sel] = ry
            self.theta[sel] = rtheta
        return estimate


class IcpBaseline:
    """Iterative nearest-landmark matching with a closed-form rigid refit.

    Every observation corresponds to the nearest landmark of its label under
    the current pose; no outlier rejection is applied.
    """

    def __init__(
        self,
        fmap: FieldMap,
        initial_pose: Pose2D,
        max_iterations: int = 10,
        converged_tol: float = 1e-4,
    ):
        self.landmarks_by_label = _label_arrays(fmap)
        self.pose = initial_pose
        self.max_iterations = max_iterations
        self.converged_tol = converged_tol

    def step(self, observations: Sequence[BodyLandmark], odometry_delta: Pose2D) -> Pose2D:
        pose = compose(self.pose, odometry_delta)
        usable = [o for o in observations if o.label in self.landmarks_by_label]
        if not usable:
            self.pose = pose
            return pose

        body = np.array([o.position for o in usable])
        for _ in range(self.max_iterations):
            c = math.cos(pose.theta)
            s = math.sin(pose.theta)
            wx = pose.x + c * body[:, 0] - s * body[:, 1]
            wy = pose.y + s * body[:, 0] + c * body[:, 1]
            targets = np.empty_like(body)
            for k, o in enumerate(usable):
                pts = self.landmarks_by_label[o.label]
                d2 = (pts[:, 0] - wx[k]) ** 2 + (pts[:, 1] - wy[k]) ** 2
                targets[k] = pts[int(d2.argmin())]
            new_pose = self._fit(body, targets, pose)
            shift = math.hypot(new_pose.x - pose.x, new_pose.y - pose.y) + abs(
                wrap_angle(new_pose.theta - pose.theta)
            )
            pose = new_pose
            if shift < self.converged_tol:
                break
        self.pose = pose
        return pose

    @staticmethod
    def _fit(body: np.ndarray, targets: np.ndarray, current: Pose2D) -> Pose2D:
        if body.shape[0] == 1:
            c = math.cos(current.theta)
            s = math.sin(current.theta)
            return Pose2D(
                targets[0, 0] - (c * body[0, 0] - s * body[0, 1]),
                targets[0, 1] - (s * body[0, 0] + c * body[0, 1]),
                current.theta,
            )
        bc = body.mean(axis=0)
        tc = targets.mean(axis=0)
        b0 = body - bc
        t0 = targets - tc
        dot = float((b0 * t0).sum())
        cross = float((b0[:, 0] * t0[:, 1] - b0[:, 1] * t0[:, 0]).sum())
        theta = math.atan2(cross, dot)
        c = math.cos(theta)
        s = math.sin(theta)
        return Pose2D(
            tc[0] - (c * bc[0] - s * bc[1]),
            tc[1] - (s * bc[0] + c * bc[1]),
            theta,
        )
