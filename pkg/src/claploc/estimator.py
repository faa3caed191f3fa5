"""Pair-candidate localization: generate pose hypotheses from every observation
pair, average the ones near the previous estimate, and cross-check against a
trimmed 2-means over a multi-frame candidate buffer that can reset the track.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .field_map import LABEL_ORDER, BodyLandmark, FieldMap, MatchTolerance
from .geometry import (
    EPS_PAIR,
    Pose2D,
    PoseMetric,
    compose,
    field_symmetric_twin,
    pose_distance,
    wrap_angle,
)

SOURCE_LOCAL = "local"
SOURCE_GLOBAL_RESET = "global-reset"
SOURCE_ODOMETRY = "odometry-only"

#: minimum edge length of the occupancy cells used to weight coincident
#: hypotheses in the global clustering (embedded pose space); widened to the
#: matcher's noise floor at run time
DENSITY_CELL = 0.3


class InsufficientCandidatesError(ValueError):
    """Global clustering needs at least two buffered candidates."""


@dataclass(frozen=True)
class EstimatorConfig:
    """All thresholds of the pipeline; every field can come from key=value config."""

    delta_t: float = 0.8          # local cluster radius, meter-equivalent
    delta_c: float = 1.5          # local/global disagreement that forces a reset
    metric: PoseMetric = field(default_factory=PoseMetric)
    tol: MatchTolerance = field(default_factory=MatchTolerance)
    max_landmarks: int = 7
    # same-label pairs cost one mirrored duplicate each but are often the
    # nearest, least-noisy pairs available; skipping is off unless a scene
    # reliably has this many unique-label pairs
    min_unique_pairs_to_skip_nonunique: int = 1_000_000
    # the buffer is mostly mismatch scatter; the trimmed 2-means needs this
    # many peel-and-refit rounds over a multi-second window to isolate the
    # dense stacks reliably
    kmeans_iterations: int = 8
    trim_fraction: float = 0.25
    buffer_frames: int = 30
    global_every: int = 10

    def __post_init__(self) -> None:
        if self.delta_t <= 0.0 or self.delta_c <= 0.0:
            raise ValueError("delta_t and delta_c must be positive")
        if not 0.0 <= self.trim_fraction < 0.5:
            raise ValueError("trim_fraction must be in [0, 0.5)")
        if self.buffer_frames < 1:
            raise ValueError("buffer_frames must be at least 1")
        if self.max_landmarks < 2:
            raise ValueError("max_landmarks must be at least 2")
        if self.kmeans_iterations < 1 or self.global_every < 1:
            raise ValueError("kmeans_iterations and global_every must be at least 1")


@dataclass(frozen=True, slots=True)
class CandidateState:
    """One pose hypothesis from matching a body pair onto a world pair."""

    pose: Pose2D
    body_pair_ids: Tuple[int, int]
    world_pair_ids: Tuple[int, int]
    frame: int


class CandidateBatch(Sequence[CandidateState]):
    """Column-wise candidate storage; iterates as CandidateState objects.

    Keeping poses in one (n, 3) array lets clustering and buffer propagation
    stay vectorized on the hot path. ``same_label`` marks candidates from
    equal-label pairs, whose mirrored duplicates recur at fixed wrong poses
    frame after frame and must not accumulate in the global buffer.
    """

    __slots__ = ("poses", "body_ids", "world_ids", "same_label", "frame")

    def __init__(
        self,
        poses: np.ndarray,
        body_ids: np.ndarray,
        world_ids: np.ndarray,
        frame: int,
        same_label: Optional[np.ndarray] = None,
    ):
        self.poses = poses
        self.body_ids = body_ids
        self.world_ids = world_ids
        self.same_label = (
            same_label if same_label is not None else np.zeros(poses.shape[0], dtype=bool)
        )
        self.frame = frame

    def __len__(self) -> int:
        return self.poses.shape[0]

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(len(self)))]
        return CandidateState(
            pose=Pose2D(*self.poses[k]),
            body_pair_ids=(int(self.body_ids[k, 0]), int(self.body_ids[k, 1])),
            world_pair_ids=(int(self.world_ids[k, 0]), int(self.world_ids[k, 1])),
            frame=self.frame,
        )

    @staticmethod
    def empty(frame: int) -> "CandidateBatch":
        return CandidateBatch(
            np.empty((0, 3)), np.empty((0, 2), dtype=np.int64), np.empty((0, 2), dtype=np.int64), frame
        )


def _wrap_array(theta: np.ndarray) -> np.ndarray:
    return np.pi - (np.pi - theta) % (2.0 * np.pi)


def truncate_observations(
    observations: Sequence[BodyLandmark], max_landmarks: int
) -> List[BodyLandmark]:
    """Keep the ``max_landmarks`` nearest observations (stable on ties)."""
    if len(observations) <= max_landmarks:
        return list(observations)
    order = sorted(range(len(observations)), key=lambda i: (observations[i].range, i))
    keep = sorted(order[:max_landmarks])
    return [observations[i] for i in keep]


def generate_candidates(
    observations: Sequence[BodyLandmark],
    fmap: FieldMap,
    cfg: EstimatorConfig,
    frame: int = 0,
) -> CandidateBatch:
    """Pose hypotheses for every usable observation pair against the map.

    Same-label pairs are dropped once enough unique-label pairs exist; when
    kept, both world orderings of a matching pair are emitted so the mirror
    ambiguity is explicit. Coincident pairs are skipped. Fewer than two
    observations yield an empty batch.
    """
    obs = truncate_observations(observations, cfg.max_landmarks)
    n = len(obs)
    if n < 2:
        return CandidateBatch.empty(frame)

    # orient each body pair to the canonical label order of its pair table
    pairs = []
    unique_pairs = 0
    for i in range(n):
        for j in range(i + 1, n):
            same = obs[i].label == obs[j].label
            a, b = (i, j)
            if not same and LABEL_ORDER[obs[i].label] > LABEL_ORDER[obs[j].label]:
                a, b = (j, i)
            dx = obs[b].position[0] - obs[a].position[0]
            dy = obs[b].position[1] - obs[a].position[1]
            d = math.hypot(dx, dy)
            if d <= EPS_PAIR:
                continue
            if not same:
                unique_pairs += 1
            pairs.append((a, b, d, math.atan2(dy, dx), same))
    skip_same = unique_pairs >= cfg.min_unique_pairs_to_skip_nonunique

    idx_chunks = []
    meta = []  # (body first idx, body second idx, first position, bearing, window size)
    rows = 0
    for i, j, d, bearing, same in pairs:
        if same and skip_same:
            continue
        table = fmap.pair_table(obs[i].label, obs[j].label)
        if table is None:
            continue
        slack = cfg.tol.pair_slack(d, obs[i].range, obs[j].range)
        if slack is None:
            continue
        lo, hi = table.window(d - slack, d + slack)
        if hi <= lo:
            continue
        idx_chunks.append((table, lo, hi))
        meta.append((i, j, obs[i].position, bearing, hi - lo, same))
        rows += hi - lo
    if rows == 0:
        return CandidateBatch.empty(frame)

    w_bearing = np.concatenate([t.bearings[lo:hi] for t, lo, hi in idx_chunks])
    w1x = np.concatenate([t.w1x[lo:hi] for t, lo, hi in idx_chunks])
    w1y = np.concatenate([t.w1y[lo:hi] for t, lo, hi in idx_chunks])
    first_ids = np.concatenate([t.first_ids[lo:hi] for t, lo, hi in idx_chunks])
    second_ids = np.concatenate([t.second_ids[lo:hi] for t, lo, hi in idx_chunks])

    counts = np.array([m[4] for m in meta])
    b1 = np.repeat(np.array([m[2] for m in meta]), counts, axis=0)
    b_bearing = np.repeat(np.array([m[3] for m in meta]), counts)
    body_i = np.repeat(np.array([m[0] for m in meta], dtype=np.int64), counts)
    body_j = np.repeat(np.array([m[1] for m in meta], dtype=np.int64), counts)
    same_label = np.repeat(np.array([m[5] for m in meta], dtype=bool), counts)

    theta = _wrap_array(w_bearing - b_bearing)
    c = np.cos(theta)
    s = np.sin(theta)
    px = w1x - (c * b1[:, 0] - s * b1[:, 1])
    py = w1y - (s * b1[:, 0] + c * b1[:, 1])

    poses = np.column_stack((px, py, theta))
    body_ids = np.column_stack((body_i, body_j))
    world_ids = np.column_stack((first_ids, second_ids))
    return CandidateBatch(poses, body_ids, world_ids, frame, same_label)


class LocalCluster(NamedTuple):
    pose: Pose2D
    size: int


def _pose_distance_array(poses: np.ndarray, ref: Pose2D, metric: PoseMetric) -> np.ndarray:
    dx = poses[:, 0] - ref.x
    dy = poses[:, 1] - ref.y
    dth = _wrap_array(poses[:, 2] - ref.theta) * metric.theta_weight
    return np.sqrt(dx * dx + dy * dy + dth * dth)


def local_cluster(
    candidates: CandidateBatch, prev: Pose2D, cfg: EstimatorConfig
) -> Optional[LocalCluster]:
    """Average of all candidates within ``delta_t`` of the previous estimate.

    Position is the arithmetic mean, heading the circular mean. None when no
    candidate qualifies.
    """
    if len(candidates) == 0:
        return None
    dist = _pose_distance_array(candidates.poses, prev, cfg.metric)
    mask = dist < cfg.delta_t
    size = int(mask.sum())
    if size == 0:
        return None
    member = candidates.poses[mask]
    theta = math.atan2(np.sin(member[:, 2]).sum(), np.cos(member[:, 2]).sum())
    return LocalCluster(
        Pose2D(float(member[:, 0].mean()), float(member[:, 1].mean()), wrap_angle(theta)),
        size,
    )


class CandidateBuffer:
    """Ring of recent candidate pose sets, re-expressed at the current time.

    Each stored pose is composed with every odometry increment that arrives
    after its frame, so the whole buffer stays comparable with fresh
    candidates.
    """

    def __init__(self, max_frames: int):
        self.max_frames = max_frames
        self._frames: Deque[np.ndarray] = deque(maxlen=max_frames)

    def append(self, poses: np.ndarray) -> None:
        self._frames.append(np.array(poses, dtype=np.float64, copy=True))

    def propagate(self, delta: Pose2D) -> "CandidateBuffer":
        if delta.x == 0.0 and delta.y == 0.0 and delta.theta == 0.0:
            return self
        for arr in self._frames:
            if arr.shape[0] == 0:
                continue
            c = np.cos(arr[:, 2])
            s = np.sin(arr[:, 2])
            arr[:, 0] += c * delta.x - s * delta.y
            arr[:, 1] += s * delta.x + c * delta.y
            arr[:, 2] = _wrap_array(arr[:, 2] + delta.theta)
        return self

    def pose_array(self) -> np.ndarray:
        live = [a for a in self._frames if a.shape[0]]
        if not live:
            return np.empty((0, 3))
        return np.concatenate(live, axis=0)

    def __len__(self) -> int:
        return len(self._frames)

    @property
    def total_candidates(self) -> int:
        return sum(a.shape[0] for a in self._frames)


def propagate_buffer(buffer: CandidateBuffer, odometry_delta: Pose2D) -> CandidateBuffer:
    return buffer.propagate(odometry_delta)


def global_cluster(
    buffer,
    prev: Pose2D,
    cfg: EstimatorConfig,
    bounds: Optional[Tuple[float, float, float, float]] = None,
) -> Pose2D:
    """Trimmed 2-means over all buffered candidates; returns the centroid
    nearest the previous estimate.

    Headings are embedded as weighted (cos, sin) so the field's half-turn
    twin states separate cleanly. Seeds are the previous estimate and its
    twin; each iteration drops the trim fraction of points farthest from
    their assigned centroid before re-fitting. A plain mean re-fit gets
    dragged off the correct pose by structured mismatch stacks, so each
    cluster re-fits to the weighted mean around its density peak: the pose
    hypotheses that recur identically across the buffer (grid occupancy
    counts) anchor their cluster, and correct poses recur by construction.
    Clusters that lose all members are discarded. ``bounds`` (xmin, xmax,
    ymin, ymax) drops hypotheses at poses the robot cannot occupy before
    clustering.
    """
    if isinstance(buffer, CandidateBuffer):
        poses = buffer.pose_array()
    else:
        poses = np.asarray(buffer, dtype=np.float64).reshape(-1, 3)
    if bounds is not None and poses.shape[0]:
        xmin, xmax, ymin, ymax = bounds
        keep = (
            (poses[:, 0] >= xmin)
            & (poses[:, 0] <= xmax)
            & (poses[:, 1] >= ymin)
            & (poses[:, 1] <= ymax)
        )
        poses = poses[keep]
    if poses.shape[0] < 2:
        raise InsufficientCandidatesError("global clustering needs at least 2 candidates")

    w = cfg.metric.theta_weight
    pts = np.column_stack(
        (poses[:, 0], poses[:, 1], w * np.cos(poses[:, 2]), w * np.sin(poses[:, 2]))
    )
    # correct hypotheses recur within the observation noise, so the occupancy
    # cell tracks the matcher's noise floor
    cell = max(DENSITY_CELL, cfg.tol.floor)
    peak_radius = 1.5 * cell
    cells = np.round(pts / cell).astype(np.int64)
    _, inverse, counts = np.unique(cells, axis=0, return_inverse=True, return_counts=True)
    weights = counts[inverse].astype(np.float64)

    def embed(p: Pose2D) -> np.ndarray:
        return np.array([p.x, p.y, w * math.cos(p.theta), w * math.sin(p.theta)])

    twin = field_symmetric_twin(prev)
    centroids = np.stack((embed(prev), embed(twin)))
    alive = [True, True]

    for _ in range(cfg.kmeans_iterations):
        active = [k for k in range(2) if alive[k]]
        d2 = np.stack([((pts - centroids[k]) ** 2).sum(axis=1) for k in active], axis=1)
        pick = d2.argmin(axis=1)
        assign = np.array(active)[pick]
        best = d2[np.arange(pts.shape[0]), pick]

        # only points outside their cluster's core are outlier candidates;
        # once the scatter is consumed the trim stops instead of eating the
        # coincident stacks themselves
        eligible = np.flatnonzero(best > peak_radius**2)
        n_drop = min(int(cfg.trim_fraction * pts.shape[0]), eligible.size)
        if n_drop and pts.shape[0] - n_drop >= 2:
            drop = eligible[np.argsort(best[eligible], kind="stable")[-n_drop:]]
            mask = np.ones(pts.shape[0], dtype=bool)
            mask[drop] = False
            pts = pts[mask]
            assign = assign[mask]
            weights = weights[mask]
            best = best[mask]

        for k in range(2):
            if not alive[k]:
                continue
            member = np.flatnonzero(assign == k)
            if member.size == 0:
                alive[k] = False
                continue
            # heaviest member anchors the cluster; among equally heavy stacks
            # the one nearest the current centroid (initially the seed) wins
            order = np.lexsort((best[member], -weights[member]))
            peak = member[order[0]]
            near = ((pts[member] - pts[peak]) ** 2).sum(axis=1) <= peak_radius**2
            core = member[near]
            total = float(weights[core].sum())
            centroids[k] = (weights[core, None] * pts[core]).sum(axis=0) / total

    best_pose = None
    best_dist = math.inf
    for k in range(2):
        if not alive[k]:
            continue
        cx, cy, cc, cs = centroids[k]
        pose = Pose2D(float(cx), float(cy), math.atan2(cs, cc))
        d = pose_distance(pose, prev, cfg.metric)
        if d < best_dist:
            best_dist = d
            best_pose = pose
    assert best_pose is not None
    return best_pose


@dataclass(frozen=True, slots=True)
class EstimateOutput:
    pose: Pose2D
    source: str
    candidate_count: int
    local_cluster_size: int


def merge_estimates(
    local: Optional[Pose2D],
    global_pose: Optional[Pose2D],
    prev: Pose2D,
    cfg: EstimatorConfig,
) -> Tuple[Pose2D, str]:
    """Pick between the local average and the global check.

    The global estimate wins only when it disagrees with the local one (or,
    lacking a local cluster, with the dead-reckoned previous pose) by more
    than ``delta_c``; otherwise the local estimate, then dead reckoning, is
    used.
    """
    if local is None:
        if global_pose is not None and pose_distance(prev, global_pose, cfg.metric) > cfg.delta_c:
            return global_pose, SOURCE_GLOBAL_RESET
        return prev, SOURCE_ODOMETRY
    if global_pose is not None and pose_distance(local, global_pose, cfg.metric) > cfg.delta_c:
        return global_pose, SOURCE_GLOBAL_RESET
    return local, SOURCE_LOCAL


class ClapEstimator:
    """Stateful per-frame localizer; one ``step`` per camera frame.

    Not thread-safe: call ``step`` from one thread at a time per instance.
    """

    #: extra slack beyond the landmark extents for the reachable-pose bounds:
    #: 1 m border strip plus noise headroom
    BOUNDS_MARGIN = 1.5
    #: a global check is meaningless on a starved buffer (visibility holes
    #: leave only stray mismatches behind)
    MIN_GLOBAL_BUFFER = 20
    #: a global centroid may override the track only when the current frame
    #: corroborates it; persistent stacks of stale mismatches do not
    MIN_GLOBAL_SUPPORT = 3

    def __init__(self, fmap: FieldMap, cfg: EstimatorConfig, initial_pose: Pose2D):
        self.fmap = fmap
        self.cfg = cfg
        self._pose = initial_pose
        self._buffer = CandidateBuffer(cfg.buffer_frames)
        self._frame = 0
        xs = [lm.position[0] for lm in fmap.landmarks]
        ys = [lm.position[1] for lm in fmap.landmarks]
        m = self.BOUNDS_MARGIN
        self._bounds = (min(xs) - m, max(xs) + m, min(ys) - m, max(ys) + m)

    @property
    def pose(self) -> Pose2D:
        return self._pose

    @property
    def frame(self) -> int:
        return self._frame

    @property
    def buffer(self) -> CandidateBuffer:
        return self._buffer

    def teleport(self, pose: Pose2D) -> None:
        """Force the track to ``pose`` (kidnapped-robot scenarios, tests)."""
        self._pose = pose

    def step(self, observations: Sequence[BodyLandmark], odometry_delta: Pose2D) -> EstimateOutput:
        self._pose = compose(self._pose, odometry_delta)
        self._buffer.propagate(odometry_delta)

        candidates = generate_candidates(observations, self.fmap, self.cfg, self._frame)
        local = local_cluster(candidates, self._pose, self.cfg)

        global_pose = None
        if (
            self._frame % self.cfg.global_every == 0
            and self._buffer.total_candidates >= self.MIN_GLOBAL_BUFFER
        ):
            try:
                global_pose = global_cluster(self._buffer, self._pose, self.cfg, self._bounds)
            except InsufficientCandidatesError:
                global_pose = None
            if global_pose is not None and len(candidates):
                support = int(
                    (_pose_distance_array(candidates.poses, global_pose, self.cfg.metric)
                     < self.cfg.delta_t).sum()
                )
                if support < self.MIN_GLOBAL_SUPPORT:
                    global_pose = None
            elif global_pose is not None:
                global_pose = None

        pose, source = merge_estimates(
            local.pose if local else None, global_pose, self._pose, self.cfg
        )

        self._buffer.append(candidates.poses)
        self._pose = pose
        self._frame += 1
        return EstimateOutput(
            pose=pose,
            source=source,
            candidate_count=len(candidates),
            local_cluster_size=local.size if local else 0,
        )
