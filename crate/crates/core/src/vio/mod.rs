//! Simulated visual-inertial odometry: test trajectories, hardware presets,
//! a seeded noise/drift/latency estimator and accuracy metrics.

mod calibrate;
mod estimator;
mod metrics;
mod preset;
mod trajectory;

pub use calibrate::{fit_preset, mean_average_error, CalibrationResult};
pub use estimator::{estimate_stream, sample_count, PoseSample, VioErrorModel};
pub use metrics::{absolute_orientation_error, absolute_position_error, ErrorSeries};
pub use preset::{
    calibration_target, shipped_preset, shipped_presets, uncalibrated_shape, PresetFile, VioPreset,
    PRESET_NAMES,
};
pub use trajectory::{
    generate_test_trajectory, GroundTruthTrajectory, MotionAxis, Segment, SegmentShape,
    TrajectorySpec,
};
