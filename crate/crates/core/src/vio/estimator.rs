use nalgebra::{UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::preset::VioPreset;
use super::trajectory::GroundTruthTrajectory;
use crate::error::VioError;
use crate::kinematics::Pose;

/// One time-stamped pose estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSample {
    pub t: f64,
    pub pose: Pose,
}

/// Stateful error model: `estimate = drift ∘ truth ∘ noise`, where the drift
/// is a world-frame random walk advanced once per output sample and the noise
/// is white in the body frame.
#[derive(Debug, Clone)]
pub struct VioErrorModel {
    preset: VioPreset,
    rng: ChaCha8Rng,
    drift_t: Vector3<f64>,
    drift_r: Vector3<f64>,
}

impl VioErrorModel {
    pub fn new(preset: VioPreset, seed: u64) -> Result<Self, VioError> {
        preset.validate()?;
        Ok(Self {
            preset,
            rng: ChaCha8Rng::seed_from_u64(seed),
            drift_t: Vector3::zeros(),
            drift_r: Vector3::zeros(),
        })
    }

    pub fn preset(&self) -> &VioPreset {
        &self.preset
    }

    fn gaussian3(&mut self, std: f64) -> Vector3<f64> {
        if std == 0.0 {
            return Vector3::zeros();
        }
        let mut draw = || -> f64 { StandardNormal.sample(&mut self.rng) };
        Vector3::new(draw(), draw(), draw()) * std
    }

    /// Corrupts `truth` for the current sample and advances the drift by one
    /// output period.
    pub fn corrupt(&mut self, truth: &Pose) -> Pose {
        let p = &self.preset;
        let (sigma_t, sigma_r) = (p.sigma_t, p.sigma_r);
        let step = (1.0 / p.rate).sqrt();
        let (walk_t, walk_r) = (p.beta_t * step, p.beta_r * step);

        let noise = Pose::new(
            UnitQuaternion::from_scaled_axis(self.gaussian3(sigma_r)),
            self.gaussian3(sigma_t),
        );
        let drift = Pose::new(UnitQuaternion::from_scaled_axis(self.drift_r), self.drift_t);
        let estimate = drift.compose(truth).compose(&noise);

        let (dt, dr) = (self.gaussian3(walk_t), self.gaussian3(walk_r));
        self.drift_t += dt;
        self.drift_r += dr;
        estimate
    }
}

/// Number of output samples the preset produces over `duration` seconds.
pub fn sample_count(duration: f64, rate: f64) -> usize {
    (duration * rate + 1e-9).floor().max(0.0) as usize
}

/// Simulated estimator output over `gt`: samples at `k / rate`, each reporting
/// the truth from `latency` earlier, corrupted by the error model.
pub fn estimate_stream(
    gt: &GroundTruthTrajectory,
    preset: &VioPreset,
    seed: u64,
) -> Result<Vec<PoseSample>, VioError> {
    let mut model = VioErrorModel::new(preset.clone(), seed)?;
    let n = sample_count(gt.duration(), preset.rate);
    let t0 = gt.start();
    let latency = preset.latency();
    Ok((0..n)
        .map(|k| {
            let t = t0 + k as f64 / preset.rate;
            let truth = gt.sample((t - latency).max(t0));
            PoseSample {
                t,
                pose: model.corrupt(&truth),
            }
        })
        .collect())
}
