"""A priori landmark map: labels, file format, and distance-indexed pair retrieval.

Matching an observed pair against the map is a range query on inter-landmark
distance, so the map precomputes, per label pattern, distance-sorted arrays of
every landmark pair. The arrays double as the vectorized lookup tables used by
the candidate generator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np


class MapError(ValueError):
    """Base class for map document problems."""


class MapParseError(MapError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DuplicateLandmarkError(MapError):
    pass


class EmptyMapError(MapError):
    pass


class LandmarkLabel(str, Enum):
    """Field feature classes: corner, T-intersection, cross, goal post."""

    L = "L"
    T = "T"
    X = "X"
    G = "G"


#: Canonical label ordering used for pair keys: L < T < X < G.
LABEL_ORDER = {LandmarkLabel.L: 0, LandmarkLabel.T: 1, LandmarkLabel.X: 2, LandmarkLabel.G: 3}


@dataclass(frozen=True, slots=True)
class MapLandmark:
    id: int
    label: LandmarkLabel
    position: Tuple[float, float]


@dataclass(frozen=True, slots=True)
class BodyLandmark:
    """One detection in the robot body frame (x forward, meters)."""

    label: LandmarkLabel
    position: Tuple[float, float]

    @property
    def range(self) -> float:
        return math.hypot(self.position[0], self.position[1])


# (upper range in meters, fractional position error) per the perception model;
# the last band is open-ended.
DEFAULT_NOISE_BANDS: Tuple[Tuple[float, float], ...] = (
    (2.0, 0.01),
    (4.0, 0.03),
    (6.0, 0.05),
    (8.0, 0.08),
    (math.inf, 0.10),
)


def band_fraction(distance: float, bands: Sequence[Tuple[float, float]] = DEFAULT_NOISE_BANDS) -> float:
    """Fractional position error applicable at ``distance``."""
    for upper, frac in bands:
        if distance < upper:
            return frac
    return bands[-1][1]


@dataclass(frozen=True)
class MatchTolerance:
    """Allowed slack on a measured inter-landmark distance.

    tol(d) = max(floor, scale * band_fraction(d) * d), nondecreasing in d;
    ``scale=0`` degenerates to a constant tolerance of ``floor``. When the
    observation ranges of the two landmarks are known, ``pair_slack`` widens
    the window by their banded position noise: the error on a pair's length
    is driven by how far each landmark sits from the robot, not by the pair
    separation itself.
    """

    floor: float = 0.2
    scale: float = 2.0
    range_scale: float = 1.5
    max_slack: float = 1.0
    bands: Tuple[Tuple[float, float], ...] = DEFAULT_NOISE_BANDS

    def __post_init__(self) -> None:
        if self.floor < 0.0 or self.scale < 0.0 or self.range_scale < 0.0:
            raise ValueError("tolerance parameters must be nonnegative")
        if self.max_slack <= 0.0:
            raise ValueError("max_slack must be positive")

    def __call__(self, distance: float) -> float:
        return max(self.floor, self.scale * band_fraction(distance, self.bands) * distance)

    def pair_slack(self, distance: float, range_a: float, range_b: float) -> Optional[float]:
        """Match window for a pair observed at the given ranges; None when the
        position noise at those ranges makes the pair length useless as an
        identifier (window beyond ``max_slack``)."""
        ranged = self.range_scale * (
            band_fraction(range_a, self.bands) * range_a
            + band_fraction(range_b, self.bands) * range_b
        )
        slack = max(self(distance), ranged)
        if slack > self.max_slack or slack > 0.5 * distance:
            return None
        return slack

    @staticmethod
    def constant(value: float) -> "MatchTolerance":
        return MatchTolerance(floor=value, scale=0.0, range_scale=0.0, max_slack=math.inf)


class _PairTable:
    """Distance-sorted ordered world pairs for one canonical label pattern.

    Rows for an equal-label pattern appear in both orientations so a query
    can enumerate the mirror ambiguity directly.
    """

    __slots__ = ("dists", "first_ids", "second_ids", "w1x", "w1y", "bearings")

    def __init__(self, rows: List[Tuple[float, int, int, float, float, float, float]]):
        rows.sort(key=lambda r: (r[0], r[1], r[2]))
        self.dists = np.array([r[0] for r in rows], dtype=np.float64)
        self.first_ids = np.array([r[1] for r in rows], dtype=np.int64)
        self.second_ids = np.array([r[2] for r in rows], dtype=np.int64)
        self.w1x = np.array([r[3] for r in rows], dtype=np.float64)
        self.w1y = np.array([r[4] for r in rows], dtype=np.float64)
        # bearing of (second - first) in the field frame, precomputed for the
        # vectorized pose solver
        self.bearings = np.arctan2(
            np.array([r[6] for r in rows]) - self.w1y,
            np.array([r[5] for r in rows]) - self.w1x,
        )

    def window(self, lo: float, hi: float) -> Tuple[int, int]:
        return (
            int(np.searchsorted(self.dists, lo, side="left")),
            int(np.searchsorted(self.dists, hi, side="right")),
        )


def canonical_key(a: LandmarkLabel, b: LandmarkLabel) -> Tuple[LandmarkLabel, LandmarkLabel]:
    return (a, b) if LABEL_ORDER[a] <= LABEL_ORDER[b] else (b, a)


class FieldMap:
    """Immutable landmark map with a precomputed pair-distance index."""

    def __init__(self, landmarks: Sequence[MapLandmark]):
        if not landmarks:
            raise EmptyMapError("map contains no landmarks")
        self.landmarks: Tuple[MapLandmark, ...] = tuple(landmarks)
        self._by_id = {lm.id: lm for lm in self.landmarks}
        if len(self._by_id) != len(self.landmarks):
            raise MapError("landmark ids are not unique")
        seen: Dict[Tuple[float, float], MapLandmark] = {}
        for lm in self.landmarks:
            prior = seen.get(lm.position)
            if prior is not None:
                raise DuplicateLandmarkError(
                    f"landmarks {prior.id} and {lm.id} share position {lm.position}"
                )
            seen[lm.position] = lm
        self._tables = self._build_tables()

    def _build_tables(self) -> Dict[Tuple[LandmarkLabel, LandmarkLabel], _PairTable]:
        rows: Dict[Tuple[LandmarkLabel, LandmarkLabel], List] = {}
        for i, a in enumerate(self.landmarks):
            for b in self.landmarks[i + 1 :]:
                d = math.dist(a.position, b.position)
                key = canonical_key(a.label, b.label)
                first, second = (a, b)
                if (LABEL_ORDER[a.label], a.id) > (LABEL_ORDER[b.label], b.id):
                    first, second = (b, a)
                entry = rows.setdefault(key, [])
                entry.append(
                    (d, first.id, second.id, *first.position, *second.position)
                )
                if a.label == b.label:
                    entry.append(
                        (d, second.id, first.id, *second.position, *first.position)
                    )
        return {key: _PairTable(r) for key, r in rows.items()}

    @property
    def unordered_pair_count(self) -> int:
        n = len(self.landmarks)
        return n * (n - 1) // 2

    def landmark(self, landmark_id: int) -> MapLandmark:
        return self._by_id[landmark_id]

    def pair_table(self, label_a: LandmarkLabel, label_b: LandmarkLabel) -> "_PairTable | None":
        return self._tables.get(canonical_key(label_a, label_b))

    def match_pairs(
        self,
        label_a: LandmarkLabel,
        label_b: LandmarkLabel,
        measured_distance: float,
        tol: MatchTolerance,
    ) -> List[Tuple[MapLandmark, MapLandmark]]:
        """Ordered world pairs labelled (a, b) whose separation is compatible
        with ``measured_distance`` under ``tol``. Ascending id order; an empty
        list means no match."""
        if measured_distance <= 0.0:
            raise ValueError("measured distance must be positive")
        table = self._tables.get(canonical_key(label_a, label_b))
        if table is None:
            return []
        slack = tol(measured_distance)
        lo, hi = table.window(measured_distance - slack, measured_distance + slack)
        flipped = LABEL_ORDER[label_a] > LABEL_ORDER[label_b]
        out = []
        for k in range(lo, hi):
            first = self._by_id[int(table.first_ids[k])]
            second = self._by_id[int(table.second_ids[k])]
            out.append((second, first) if flipped else (first, second))
        out.sort(key=lambda p: (p[0].id, p[1].id))
        return out


def load_field_map(text: str) -> FieldMap:
    """Parse the line-oriented map document: ``LABEL x y``, ``#`` comments."""
    labels = {m.value for m in LandmarkLabel}
    landmarks: List[MapLandmark] = []
    seen = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise MapParseError(line_no, f"expected 'LABEL x y', got {raw!r}")
        if parts[0] not in labels:
            raise MapParseError(line_no, f"unknown label {parts[0]!r}")
        try:
            x = float(parts[1])
            y = float(parts[2])
        except ValueError:
            raise MapParseError(line_no, f"bad coordinates in {raw!r}") from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise MapParseError(line_no, "coordinates must be finite")
        key = (parts[0], x, y)
        if key in seen:
            raise DuplicateLandmarkError(f"line {line_no}: duplicate landmark {line!r}")
        seen.add(key)
        landmarks.append(MapLandmark(len(landmarks), LandmarkLabel(parts[0]), (x, y)))
    if not landmarks:
        raise EmptyMapError("map document has no landmark lines")
    return FieldMap(landmarks)


def dump_field_map(fmap: FieldMap) -> str:
    """Serialize so that load(dump(m)) reproduces ``m`` exactly."""
    lines = [f"{lm.label.value} {lm.position[0]!r} {lm.position[1]!r}" for lm in fmap.landmarks]
    return "\n".join(lines) + "\n"


def default_adult_field() -> FieldMap:
    """The built-in 14 m x 9 m adult-size map (origin at center, x toward a goal)."""
    text = resources.files("claploc.data").joinpath("default_field.map").read_text()
    return load_field_map(text)
