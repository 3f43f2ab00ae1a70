"""scanskill: fuse ultrasound-frame and IMU-quaternion streams onto a uniform
time grid, extract texture and pose features, and score scanning-skill
sessions — with a calibrated synthetic generator for desk-scale experiments.
"""

from .core import SessionMeta, q_geodesic_angle, q_inverse, q_multiply, q_normalize
from .features import (
    FeatureRecord,
    GlcmConfig,
    HistogramStats,
    MotionSeries,
    SmoothnessConfig,
    TextureFeatures,
    angular_velocity,
    compute_feature_table,
    frame_features,
    glcm,
    log_dimensionless_jerk,
    path_length,
    sparc,
    texture_features,
)
from .fusion import (
    FusedSample,
    ResampleConfig,
    StreamingFuser,
    fuse_streams,
    hemisphere_align,
    resample_poses,
    slerp,
)
from .ingest import (
    Frame,
    PoseSample,
    Session,
    load_session,
    read_pose_csv,
    validate_session,
    write_session,
)
from .skill import (
    ClassifierThresholds,
    SkillReport,
    build_report,
    calibrate_thresholds,
    classify,
    compare,
)
from .synth import ProfileConfig, build_session, expert_profile, gen_session, novice_profile

__version__ = "0.1.0"
