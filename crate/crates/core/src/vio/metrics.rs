use serde::{Deserialize, Serialize};

use super::estimator::PoseSample;
use super::trajectory::GroundTruthTrajectory;
use crate::error::VioError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    /// `(t, error)` per estimate.
    pub series: Vec<(f64, f64)>,
    pub average: f64,
}

fn series_with(
    est: &[PoseSample],
    gt: &GroundTruthTrajectory,
    f: impl Fn(&PoseSample, &crate::kinematics::Pose) -> f64,
) -> Result<ErrorSeries, VioError> {
    if est.is_empty() {
        return Err(VioError::EmptyStream);
    }
    let series: Vec<(f64, f64)> = est
        .iter()
        .map(|s| (s.t, f(s, &gt.sample(s.t))))
        .collect();
    let average = series.iter().map(|(_, e)| e).sum::<f64>() / series.len() as f64;
    Ok(ErrorSeries { series, average })
}

/// Euclidean position error of each estimate against the ground truth at the
/// estimate's timestamp.
pub fn absolute_position_error(
    est: &[PoseSample],
    gt: &GroundTruthTrajectory,
) -> Result<ErrorSeries, VioError> {
    series_with(est, gt, |s, truth| {
        (s.pose.translation - truth.translation).norm()
    })
}

/// Geodesic orientation error (rad), reported alongside the position error.
pub fn absolute_orientation_error(
    est: &[PoseSample],
    gt: &GroundTruthTrajectory,
) -> Result<ErrorSeries, VioError> {
    series_with(est, gt, |s, truth| s.pose.rotation.angle_to(&truth.rotation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Pose;
    use crate::vio::trajectory::{generate_test_trajectory, TrajectorySpec};

    #[test]
    fn exact_estimate_has_zero_error() {
        let gt = generate_test_trajectory(&TrajectorySpec::default()).unwrap();
        let est: Vec<PoseSample> = gt
            .samples()
            .iter()
            .map(|(t, p)| PoseSample { t: *t, pose: *p })
            .collect();
        let e = absolute_position_error(&est, &gt).unwrap();
        assert!(e.series.iter().all(|(_, v)| *v == 0.0));
        assert_eq!(e.average, 0.0);
    }

    #[test]
    fn constant_offset_averages_to_offset() {
        let gt = generate_test_trajectory(&TrajectorySpec::default()).unwrap();
        let offset = Pose::from_translation(0.03, 0.0, 0.04);
        let est: Vec<PoseSample> = gt
            .samples()
            .iter()
            .map(|(t, p)| PoseSample {
                t: *t,
                pose: Pose::new(p.rotation, p.translation + offset.translation),
            })
            .collect();
        let e = absolute_position_error(&est, &gt).unwrap();
        assert!((e.average - 0.05).abs() < 1e-12);
    }

    #[test]
    fn empty_stream_is_an_error() {
        let gt = GroundTruthTrajectory::new();
        assert_eq!(absolute_position_error(&[], &gt), Err(VioError::EmptyStream));
    }
}
