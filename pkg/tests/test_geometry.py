import math

import numpy as np
import pytest

from claploc.geometry import (
    DegeneratePairError,
    Pose2D,
    PoseMetric,
    candidate_count,
    circular_mean,
    compose,
    false_pair_count,
    field_symmetric_twin,
    mirror_match,
    pose_distance,
    relative_pose,
    transform_body_to_world,
    transform_world_to_body,
    wrap_angle,
)

METRIC = PoseMetric(theta_weight=1.0)


def test_wrap_angle_range():
    rng = np.random.default_rng(0)
    for theta in rng.uniform(-50.0, 50.0, 2000):
        w = wrap_angle(float(theta))
        assert -math.pi < w <= math.pi
        assert math.isclose(math.sin(w), math.sin(theta), abs_tol=1e-12)
        assert math.isclose(math.cos(w), math.cos(theta), abs_tol=1e-12)


def test_wrap_angle_boundary():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(0.0) == 0.0


def test_pose_normalizes_theta():
    assert Pose2D(0.0, 0.0, 3 * math.pi).theta == pytest.approx(math.pi)


def test_transform_world_to_body_identity():
    assert transform_world_to_body(Pose2D(0, 0, 0), (3.0, 4.0)) == (3.0, 4.0)


def test_transform_world_to_body_hand_case():
    bx, by = transform_world_to_body(Pose2D(1.0, 0.0, math.pi / 2), (1.0, 1.0))
    assert bx == pytest.approx(1.0)
    assert by == pytest.approx(0.0, abs=1e-15)


def test_transform_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        pose = Pose2D(*rng.uniform(-10, 10, 2), rng.uniform(-math.pi, math.pi))
        point = tuple(rng.uniform(-10, 10, 2))
        back = transform_world_to_body(pose, transform_body_to_world(pose, point))
        assert math.dist(back, point) < 1e-12


def test_compose_relative_inverse():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        a = Pose2D(*rng.uniform(-5, 5, 2), rng.uniform(-math.pi, math.pi))
        b = Pose2D(*rng.uniform(-5, 5, 2), rng.uniform(-math.pi, math.pi))
        c = compose(a, relative_pose(a, b))
        assert pose_distance(b, c, METRIC) < 1e-12


def test_mirror_match_identity():
    pose = mirror_match((1, 0), (0, 1), (1, 0), (0, 1))
    assert (pose.x, pose.y, pose.theta) == (0.0, 0.0, 0.0)


def test_mirror_match_half_turn():
    pose = mirror_match((1, 0), (0, 1), (-1, 0), (0, -1))
    assert pose.x == pytest.approx(0.0, abs=1e-15)
    assert pose.y == pytest.approx(0.0, abs=1e-15)
    assert pose.theta == pytest.approx(math.pi)


def test_mirror_match_degenerate():
    with pytest.raises(DegeneratePairError):
        mirror_match((1, 1), (1, 1), (0, 0), (1, 0))
    with pytest.raises(DegeneratePairError):
        mirror_match((0, 0), (1, 0), (2, 2), (2, 2))


def test_mirror_match_round_trip_10k():
    # acceptance-level oracle: project a world pair into a random pose's body
    # frame and require the solver to recover the pose to 1e-9
    rng = np.random.default_rng(3)
    worst = 0.0
    trials = 0
    while trials < 10_000:
        pose = Pose2D(*rng.uniform(-8, 8, 2), rng.uniform(-math.pi, math.pi))
        w1 = tuple(rng.uniform(-8, 8, 2))
        w2 = tuple(rng.uniform(-8, 8, 2))
        if math.dist(w1, w2) < 1e-3:
            continue
        trials += 1
        b1 = transform_world_to_body(pose, w1)
        b2 = transform_world_to_body(pose, w2)
        got = mirror_match(b1, b2, w1, w2)
        worst = max(
            worst,
            abs(got.x - pose.x),
            abs(got.y - pose.y),
            abs(wrap_angle(got.theta - pose.theta)),
        )
    assert worst < 1e-9


def test_mirror_ambiguity_is_half_turn():
    # matching a same-label pair in both world orders flips heading by pi
    rng = np.random.default_rng(4)
    for _ in range(200):
        pose = Pose2D(*rng.uniform(-5, 5, 2), rng.uniform(-math.pi, math.pi))
        w1 = tuple(rng.uniform(-5, 5, 2))
        w2 = tuple(rng.uniform(-5, 5, 2))
        if math.dist(w1, w2) < 1e-2:
            continue
        b1 = transform_world_to_body(pose, w1)
        b2 = transform_world_to_body(pose, w2)
        direct = mirror_match(b1, b2, w1, w2)
        flipped = mirror_match(b1, b2, w2, w1)
        assert abs(wrap_angle(direct.theta - flipped.theta)) == pytest.approx(
            math.pi, abs=1e-9
        )


def test_pose_distance_examples():
    m = PoseMetric(theta_weight=1.0)
    a = Pose2D(0, 0, 0)
    assert pose_distance(a, a, m) == 0.0
    assert pose_distance(a, Pose2D(3, 4, 0), m) == pytest.approx(5.0)
    near_pi = pose_distance(
        Pose2D(0, 0, math.pi - 0.1), Pose2D(0, 0, -math.pi + 0.1), m
    )
    assert near_pi == pytest.approx(0.2, abs=1e-12)


def test_pose_distance_symmetry():
    m = PoseMetric(theta_weight=2.0)
    rng = np.random.default_rng(5)
    for _ in range(300):
        a = Pose2D(*rng.uniform(-5, 5, 2), rng.uniform(-math.pi, math.pi))
        b = Pose2D(*rng.uniform(-5, 5, 2), rng.uniform(-math.pi, math.pi))
        assert pose_distance(a, b, m) == pytest.approx(pose_distance(b, a, m))


def test_metric_requires_positive_weight():
    with pytest.raises(ValueError):
        PoseMetric(theta_weight=0.0)


def test_field_symmetric_twin_involution():
    pose = Pose2D(2.0, -1.0, 0.3)
    twin = field_symmetric_twin(pose)
    assert (twin.x, twin.y) == (-2.0, 1.0)
    back = field_symmetric_twin(twin)
    assert pose_distance(pose, back, METRIC) < 1e-12


def test_candidate_count_examples():
    assert candidate_count(2, 0) == 1
    assert candidate_count(7, 3) == 24
    assert candidate_count(0, 0) == 0


def test_candidate_count_matches_enumeration():
    for l in range(13):
        pairs = sum(1 for i in range(l) for _ in range(i + 1, l))
        for d in range(pairs + 1):
            assert candidate_count(l, d) == pairs + d
    with pytest.raises(ValueError):
        candidate_count(3, 4)
    with pytest.raises(ValueError):
        candidate_count(-1, 0)


def test_false_pair_count_examples():
    assert false_pair_count(5, 1) == 4
    assert false_pair_count(7, 2) == 11
    for l in range(13):
        assert false_pair_count(l, l) == l * (l - 1) // 2


def test_false_pair_count_matches_brute_force():
    # pairs among l items touching at least one of the first m marked items
    for l in range(13):
        for m in range(l + 1):
            brute = sum(
                1
                for i in range(l)
                for j in range(i + 1, l)
                if i < m or j < m
            )
            assert false_pair_count(l, m) == brute
    with pytest.raises(ValueError):
        false_pair_count(3, 4)


def test_circular_mean_wraps():
    assert circular_mean([math.pi - 0.05, -math.pi + 0.05]) == pytest.approx(math.pi)
    assert circular_mean([0.1, -0.1]) == pytest.approx(0.0, abs=1e-12)


def test_circular_mean_weighted():
    got = circular_mean([0.0, math.pi / 2], weights=[3.0, 1.0])
    assert got == pytest.approx(math.atan2(1.0, 3.0))
