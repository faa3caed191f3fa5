"""Flat key=value configuration with environment overrides.

Estimator keys mirror the EstimatorConfig fields; the two structured fields
flatten to ``theta_weight`` (pose metric) and ``tol_floor``/``tol_scale``
(match tolerance). Any key can also be set through ``CLAPLOC_<KEY>``.
"""
from __future__ import annotations

import os
from typing import Callable, Dict, Mapping, Optional

from .estimator import EstimatorConfig
from .field_map import MatchTolerance
from .geometry import PoseMetric

ENV_PREFIX = "CLAPLOC_"


def parse_key_values(text: str) -> Dict[str, str]:
    """Parse ``key=value`` lines; ``#`` comments and blank lines are ignored."""
    out: Dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {line_no}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _as_bool(v: str) -> bool:
    lowered = v.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


ESTIMATOR_KEYS: Dict[str, Callable[[str], object]] = {
    "delta_t": float,
    "delta_c": float,
    "theta_weight": float,
    "tol_floor": float,
    "tol_scale": float,
    "max_landmarks": int,
    "min_unique_pairs_to_skip_nonunique": int,
    "kmeans_iterations": int,
    "trim_fraction": float,
    "buffer_frames": int,
    "global_every": int,
}


def env_overrides(keys, env: Optional[Mapping[str, str]] = None, prefix: str = ENV_PREFIX) -> Dict[str, str]:
    env = os.environ if env is None else env
    out = {}
    for key in keys:
        value = env.get(prefix + key.upper())
        if value is not None:
            out[key] = value
    return out


def estimator_config_from_mapping(
    mapping: Mapping[str, str], base: Optional[EstimatorConfig] = None
) -> EstimatorConfig:
    base = base or EstimatorConfig()
    values: Dict[str, object] = {}
    for key, raw in mapping.items():
        if key not in ESTIMATOR_KEYS:
            raise ValueError(f"unknown estimator config key {key!r}")
        values[key] = ESTIMATOR_KEYS[key](raw)

    metric = base.metric
    if "theta_weight" in values:
        metric = PoseMetric(theta_weight=values.pop("theta_weight"))
    tol = base.tol
    if "tol_floor" in values or "tol_scale" in values:
        tol = MatchTolerance(
            floor=values.pop("tol_floor", tol.floor),
            scale=values.pop("tol_scale", tol.scale),
            bands=tol.bands,
        )
    return EstimatorConfig(
        delta_t=values.get("delta_t", base.delta_t),
        delta_c=values.get("delta_c", base.delta_c),
        metric=metric,
        tol=tol,
        max_landmarks=values.get("max_landmarks", base.max_landmarks),
        min_unique_pairs_to_skip_nonunique=values.get(
            "min_unique_pairs_to_skip_nonunique", base.min_unique_pairs_to_skip_nonunique
        ),
        kmeans_iterations=values.get("kmeans_iterations", base.kmeans_iterations),
        trim_fraction=values.get("trim_fraction", base.trim_fraction),
        buffer_frames=values.get("buffer_frames", base.buffer_frames),
        global_every=values.get("global_every", base.global_every),
    )


def load_estimator_config(
    text: Optional[str] = None,
    base: Optional[EstimatorConfig] = None,
    env: Optional[Mapping[str, str]] = None,
    apply_env: bool = True,
) -> EstimatorConfig:
    """Defaults, then file values, then CLAPLOC_* environment overrides."""
    mapping: Dict[str, str] = {}
    if text:
        mapping.update(parse_key_values(text))
    if apply_env:
        mapping.update(env_overrides(ESTIMATOR_KEYS, env=env))
    return estimator_config_from_mapping(mapping, base=base)
