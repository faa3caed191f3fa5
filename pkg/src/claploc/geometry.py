"""Planar pose math: rigid transforms, the pair-to-pose solver, and hypothesis counts.

Everything here is a pure function of its inputs. Angles are always kept in
(-pi, pi]; all wrapping goes through :func:`wrap_angle` so downstream code
never has to reason about branch cuts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

TWO_PI = 2.0 * math.pi

#: Body/world pairs closer than this are treated as coincident and unusable.
EPS_PAIR = 1e-6

Vec2 = Tuple[float, float]


class DegeneratePairError(ValueError):
    """Raised when a landmark pair is too close together to define a direction."""


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return math.pi - (math.pi - theta) % TWO_PI


@dataclass(frozen=True, slots=True)
class Pose2D:
    """Robot pose in the field frame: position in meters, heading in radians.

    The heading is normalized to (-pi, pi] on construction.
    """

    x: float
    y: float
    theta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", wrap_angle(self.theta))


IDENTITY_POSE = Pose2D(0.0, 0.0, 0.0)


@dataclass(frozen=True, slots=True)
class PoseMetric:
    """Mixed position/heading distance; ``theta_weight`` converts rad to meters."""

    theta_weight: float = 2.0

    def __post_init__(self) -> None:
        if self.theta_weight <= 0.0:
            raise ValueError("theta_weight must be positive")


def compose(pose: Pose2D, delta: Pose2D) -> Pose2D:
    """Apply a body-frame increment ``delta`` to ``pose``."""
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    return Pose2D(
        pose.x + c * delta.x - s * delta.y,
        pose.y + s * delta.x + c * delta.y,
        pose.theta + delta.theta,
    )


def relative_pose(a: Pose2D, b: Pose2D) -> Pose2D:
    """Body-frame increment taking ``a`` to ``b``: compose(a, relative_pose(a, b)) == b."""
    dx = b.x - a.x
    dy = b.y - a.y
    c = math.cos(a.theta)
    s = math.sin(a.theta)
    return Pose2D(c * dx + s * dy, -s * dx + c * dy, b.theta - a.theta)


def field_symmetric_twin(pose: Pose2D) -> Pose2D:
    """Pose indistinguishable from ``pose`` under a half-turn of the field."""
    return Pose2D(-pose.x, -pose.y, pose.theta + math.pi)


def transform_world_to_body(pose: Pose2D, world_point: Vec2) -> Vec2:
    """Express a field-frame point in the robot's body frame."""
    dx = world_point[0] - pose.x
    dy = world_point[1] - pose.y
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    return (c * dx + s * dy, -s * dx + c * dy)


def transform_body_to_world(pose: Pose2D, body_point: Vec2) -> Vec2:
    """Express a body-frame point in the field frame (inverse of world->body)."""
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    return (
        pose.x + c * body_point[0] - s * body_point[1],
        pose.y + s * body_point[0] + c * body_point[1],
    )


def mirror_match(
    body_first: Vec2, body_second: Vec2, world_first: Vec2, world_second: Vec2
) -> Pose2D:
    """Recover the unique pose mapping an ordered body pair onto an ordered world pair.

    The heading is the difference of the two pair bearings; the position then
    places the first body point onto the first world point. Callers are
    responsible for matching the label order of the two pairs.

    Raises:
        DegeneratePairError: if either pair is shorter than ``EPS_PAIR``.
    """
    dbx = body_second[0] - body_first[0]
    dby = body_second[1] - body_first[1]
    dwx = world_second[0] - world_first[0]
    dwy = world_second[1] - world_first[1]
    if math.hypot(dbx, dby) <= EPS_PAIR or math.hypot(dwx, dwy) <= EPS_PAIR:
        raise DegeneratePairError("landmark pair separation below EPS_PAIR")
    theta = math.atan2(dwy, dwx) - math.atan2(dby, dbx)
    c = math.cos(theta)
    s = math.sin(theta)
    px = world_first[0] - (c * body_first[0] - s * body_first[1])
    py = world_first[1] - (s * body_first[0] + c * body_first[1])
    return Pose2D(px, py, theta)


def pose_distance(a: Pose2D, b: Pose2D, metric: PoseMetric) -> float:
    """Weighted distance mixing position error and wrapped heading error."""
    dth = wrap_angle(a.theta - b.theta)
    wt = metric.theta_weight * dth
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + wt * wt)


def circular_mean(
    angles: Iterable[float], weights: Optional[Sequence[float]] = None
) -> float:
    """Mean direction of angles; weighted when ``weights`` is given."""
    cs = 0.0
    ss = 0.0
    if weights is None:
        for a in angles:
            cs += math.cos(a)
            ss += math.sin(a)
    else:
        for a, w in zip(angles, weights):
            cs += w * math.cos(a)
            ss += w * math.sin(a)
    return wrap_angle(math.atan2(ss, cs))


def candidate_count(l: int, d: int) -> int:
    """Total pose hypotheses from ``l`` observed landmarks with ``d`` same-label pairs."""
    if l < 0:
        raise ValueError("landmark count must be nonnegative")
    pairs = l * (l - 1) // 2
    if d < 0 or d > pairs:
        raise ValueError(f"same-label pair count {d} outside [0, {pairs}]")
    return pairs + d


def false_pair_count(l: int, m: int) -> int:
    """Pairs contaminated by at least one of ``m`` false detections among ``l`` total."""
    if m < 0 or m > l:
        raise ValueError(f"false detection count {m} outside [0, {l}]")
    return (2 * m * l - m * m - m) // 2
