use super::estimator::estimate_stream;
use super::metrics::absolute_position_error;
use super::preset::VioPreset;
use super::trajectory::GroundTruthTrajectory;
use crate::error::VioError;

/// Mean over `seeds` of the per-run average absolute position error.
pub fn mean_average_error(
    preset: &VioPreset,
    gt: &GroundTruthTrajectory,
    seeds: impl IntoIterator<Item = u64>,
) -> Result<f64, VioError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for seed in seeds {
        let est = estimate_stream(gt, preset, seed)?;
        sum += absolute_position_error(&est, gt)?.average;
        n += 1;
    }
    if n == 0 {
        return Err(VioError::EmptyStream);
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub preset: VioPreset,
    pub scale: f64,
    pub achieved: f64,
}

/// Finds the scale on `shape`'s noise and drift whose seed-averaged error hits
/// `target`, by bisection on the scale.
pub fn fit_preset(
    shape: &VioPreset,
    target: f64,
    gt: &GroundTruthTrajectory,
    seeds: &[u64],
) -> Result<CalibrationResult, VioError> {
    let eval = |k: f64| mean_average_error(&shape.scaled(k), gt, seeds.iter().copied());
    let floor = eval(0.0)?;
    if floor >= target {
        return Err(VioError::InvalidPreset(format!(
            "{}: latency alone gives {floor:.4} m, above the {target:.4} m target",
            shape.name
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while eval(hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(VioError::InvalidPreset(format!(
                "{}: cannot reach target {target}",
                shape.name
            )));
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let scale = 0.5 * (lo + hi);
    let preset = shape.scaled(scale);
    let achieved = eval(scale)?;
    Ok(CalibrationResult {
        preset,
        scale,
        achieved,
    })
}
