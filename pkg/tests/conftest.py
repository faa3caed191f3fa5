import math

import pytest

from claploc import FieldMap, LandmarkLabel, MapLandmark, default_adult_field


@pytest.fixture(scope="session")
def field():
    return default_adult_field()


def _unique_distance_landmarks():
    # asymmetric layout with pairwise-distinct inter-landmark distances, so a
    # tight tolerance matches every observed pair to exactly one world pair
    spec = [
        ("L", 6.3, 3.7),
        ("T", -5.1, 2.2),
        ("X", 2.4, -4.0),
        ("G", -6.8, -3.1),
        ("T", 0.7, 0.9),
        ("L", -2.6, -1.4),
    ]
    return [
        MapLandmark(i, LandmarkLabel(lab), (x, y)) for i, (lab, x, y) in enumerate(spec)
    ]


@pytest.fixture(scope="session")
def unique_map():
    landmarks = _unique_distance_landmarks()
    dists = []
    for i, a in enumerate(landmarks):
        for b in landmarks[i + 1 :]:
            dists.append(math.dist(a.position, b.position))
    dists.sort()
    gaps = [b - a for a, b in zip(dists, dists[1:])]
    assert min(gaps) > 0.25, "fixture map must have well-separated pair distances"
    return FieldMap(landmarks)
