"""Pair-based landmark localization with candidate clustering, a soccer-field
simulator, comparison baselines, and a benchmark/metrics toolkit.
"""

from .estimator import (
    CandidateBuffer,
    CandidateState,
    ClapEstimator,
    EstimateOutput,
    EstimatorConfig,
    generate_candidates,
    global_cluster,
    local_cluster,
    merge_estimates,
    propagate_buffer,
)
from .field_map import (
    BodyLandmark,
    FieldMap,
    LandmarkLabel,
    MapLandmark,
    MatchTolerance,
    default_adult_field,
    dump_field_map,
    load_field_map,
)
from .fusion import OdometryModel, Particle, ParticleFilter, dead_reckon
from .geometry import (
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
from .metrics import (
    DivergenceSpec,
    JumpSpec,
    MetricsReport,
    RunRecord,
    compute_metrics,
    count_velocity_jumps,
    divergence_fraction,
    mae_stats,
)
from .simulator import (
    NoiseProfile,
    SensorSpec,
    SimFrame,
    TrajectorySpec,
    apply_noise,
    inject_outliers,
    make_trajectory,
    simulate,
    visible_landmarks,
)

__version__ = "0.1.0"
