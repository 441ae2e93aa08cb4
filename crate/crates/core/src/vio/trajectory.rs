use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::VioError;
use crate::kinematics::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionAxis {
    X,
    Y,
    Z,
    Roll,
    Pitch,
    Yaw,
}

impl MotionAxis {
    fn is_rotation(self) -> bool {
        matches!(self, MotionAxis::Roll | MotionAxis::Pitch | MotionAxis::Yaw)
    }

    fn unit(self) -> Vector3<f64> {
        match self {
            MotionAxis::X | MotionAxis::Roll => Vector3::x(),
            MotionAxis::Y | MotionAxis::Pitch => Vector3::y(),
            MotionAxis::Z | MotionAxis::Yaw => Vector3::z(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentShape {
    /// One minimum-jerk move by `amplitude`; the offset persists.
    #[default]
    Move,
    /// `0 → +A → −A → 0`, legs of a quarter, half and quarter of the duration.
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub axis: MotionAxis,
    /// Metres for translations, radians for rotations.
    pub amplitude: f64,
    pub duration: f64,
    #[serde(default)]
    pub shape: SegmentShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub segments: Vec<Segment>,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
}

fn default_sample_rate() -> f64 {
    120.0
}

impl Default for TrajectorySpec {
    /// A ±sweep along and about each of x, y, z: 0.2 m and 0.5 rad, 10 s each.
    fn default() -> Self {
        use MotionAxis::*;
        let sweep = |axis, amplitude| Segment {
            axis,
            amplitude,
            duration: 10.0,
            shape: SegmentShape::Sweep,
        };
        Self {
            segments: vec![
                sweep(X, 0.2),
                sweep(Y, 0.2),
                sweep(Z, 0.2),
                sweep(Roll, 0.5),
                sweep(Pitch, 0.5),
                sweep(Yaw, 0.5),
            ],
            sample_rate: default_sample_rate(),
        }
    }
}

fn min_jerk(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

impl Segment {
    /// Offset along the segment axis at local time `t`.
    fn offset(&self, t: f64) -> f64 {
        let a = self.amplitude;
        match self.shape {
            SegmentShape::Move => a * min_jerk(t / self.duration),
            SegmentShape::Sweep => {
                let q = 0.25 * self.duration;
                if t < q {
                    a * min_jerk(t / q)
                } else if t < 3.0 * q {
                    a - 2.0 * a * min_jerk((t - q) / (2.0 * q))
                } else {
                    -a + a * min_jerk((t - 3.0 * q) / q)
                }
            }
        }
    }

    fn apply(&self, base: &Pose, t: f64) -> Pose {
        let v = self.offset(t);
        if self.axis.is_rotation() {
            let r = UnitQuaternion::from_scaled_axis(self.axis.unit() * v);
            Pose::new(r * base.rotation, base.translation)
        } else {
            Pose::new(base.rotation, base.translation + self.axis.unit() * v)
        }
    }
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<(), VioError> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(VioError::InvalidSpec(format!(
                "sample rate {} must be positive",
                self.sample_rate
            )));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.amplitude > 0.0 && s.amplitude.is_finite()) {
                return Err(VioError::InvalidSpec(format!(
                    "segment {i}: amplitude {} must be positive",
                    s.amplitude
                )));
            }
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(VioError::InvalidSpec(format!(
                    "segment {i}: duration {} must be positive",
                    s.duration
                )));
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Analytic pose at time `t`.
    pub fn pose_at(&self, t: f64) -> Pose {
        let mut base = Pose::identity();
        let mut start = 0.0;
        for s in &self.segments {
            if t < start + s.duration {
                return s.apply(&base, t - start);
            }
            base = s.apply(&base, s.duration);
            start += s.duration;
        }
        base
    }
}

/// Time-stamped poses. Translation is interpolated C¹ by cubic Hermite with
/// finite-difference tangents; rotation by slerp, which is smooth within a
/// segment but only continuous across samples.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthTrajectory {
    samples: Vec<(f64, Pose)>,
}

impl GroundTruthTrajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(samples: Vec<(f64, Pose)>) -> Result<Self, VioError> {
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(VioError::InvalidSpec(
                "timestamps must be strictly increasing".into(),
            ));
        }
        Ok(Self { samples })
    }

    /// Appends a sample; ignored unless its time is after the last one.
    pub fn push(&mut self, t: f64, pose: Pose) {
        if self.samples.last().is_none_or(|(last, _)| t > *last) {
            self.samples.push((t, pose));
        }
    }

    pub fn samples(&self) -> &[(f64, Pose)] {
        &self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.0)
    }

    pub fn end(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.0)
    }

    pub fn duration(&self) -> f64 {
        self.end() - self.start()
    }

    fn tangent(&self, i: usize) -> Vector3<f64> {
        let n = self.samples.len();
        let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
        if a == b {
            return Vector3::zeros();
        }
        let (ta, pa) = &self.samples[a];
        let (tb, pb) = &self.samples[b];
        (pb.translation - pa.translation) / (tb - ta)
    }

    /// Interpolated pose, clamped to the first/last sample outside the span.
    pub fn sample(&self, t: f64) -> Pose {
        let n = self.samples.len();
        if n == 0 {
            return Pose::identity();
        }
        if t <= self.samples[0].0 {
            return self.samples[0].1;
        }
        if t >= self.samples[n - 1].0 {
            return self.samples[n - 1].1;
        }
        let i = self.samples.partition_point(|(ts, _)| *ts <= t) - 1;
        let (t0, p0) = &self.samples[i];
        let (t1, p1) = &self.samples[i + 1];
        if t == *t0 {
            return *p0;
        }
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let translation = p0.translation * h00
            + self.tangent(i) * (h10 * h)
            + p1.translation * h01
            + self.tangent(i + 1) * (h11 * h);
        let rotation = p0.rotation.slerp(&p1.rotation, s);
        Pose::new(rotation, translation)
    }
}

/// Samples the spec at its sample rate into a ground-truth trajectory.
pub fn generate_test_trajectory(spec: &TrajectorySpec) -> Result<GroundTruthTrajectory, VioError> {
    spec.validate()?;
    let duration = spec.duration();
    let n = (duration * spec.sample_rate + 1e-9).floor() as usize;
    let mut samples: Vec<(f64, Pose)> = (0..=n)
        .map(|k| {
            let t = k as f64 / spec.sample_rate;
            (t, spec.pose_at(t))
        })
        .collect();
    if let Some(last) = samples.last() {
        if duration - last.0 > 1e-9 {
            samples.push((duration, spec.pose_at(duration)));
        }
    }
    GroundTruthTrajectory::from_samples(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_spec_is_identity() {
        let gt = generate_test_trajectory(&TrajectorySpec {
            segments: vec![],
            sample_rate: 100.0,
        })
        .unwrap();
        assert_eq!(gt.samples().len(), 1);
        assert_eq!(gt.sample(3.0), Pose::identity());
    }

    #[test]
    fn single_move_reaches_amplitude_at_rest() {
        let spec = TrajectorySpec {
            segments: vec![Segment {
                axis: MotionAxis::X,
                amplitude: 0.2,
                duration: 4.0,
                shape: SegmentShape::Move,
            }],
            sample_rate: 100.0,
        };
        let gt = generate_test_trajectory(&spec).unwrap();
        let end = gt.sample(gt.end());
        assert!((end.translation - Vector3::new(0.2, 0.0, 0.0)).norm() < 1e-12);
        let h = 1e-4;
        let v_end = (spec.pose_at(4.0).translation - spec.pose_at(4.0 - h).translation).norm() / h;
        let v_start = (spec.pose_at(h).translation - spec.pose_at(0.0).translation).norm() / h;
        assert!(v_end < 1e-6 && v_start < 1e-6);
    }

    #[test]
    fn default_spec_peaks_at_amplitude() {
        let spec = TrajectorySpec::default();
        let gt = generate_test_trajectory(&spec).unwrap();
        let mut max = [0.0f64; 3];
        for (_, p) in gt.samples() {
            for i in 0..3 {
                max[i] = max[i].max(p.translation[i].abs());
            }
        }
        for m in max {
            assert!((m - 0.2).abs() < 1e-12, "{m}");
        }
        let mut max_angle: f64 = 0.0;
        for (_, p) in gt.samples() {
            max_angle = max_angle.max(p.rotation.angle());
        }
        assert!((max_angle - 0.5).abs() < 1e-9);
    }

    #[test]
    fn invalid_segments_rejected() {
        let bad = TrajectorySpec {
            segments: vec![Segment {
                axis: MotionAxis::Y,
                amplitude: -0.1,
                duration: 1.0,
                shape: SegmentShape::Move,
            }],
            sample_rate: 100.0,
        };
        assert!(matches!(generate_test_trajectory(&bad), Err(VioError::InvalidSpec(_))));
    }

    #[test]
    fn interpolation_hits_samples_and_is_smooth() {
        let spec = TrajectorySpec::default();
        let gt = generate_test_trajectory(&spec).unwrap();
        for t in [0.5, 3.3, 17.77, 41.01] {
            let d = (gt.sample(t).translation - spec.pose_at(t).translation).norm();
            assert!(d < 1e-5, "t={t} d={d}");
        }
        let (t, p) = gt.samples()[37];
        assert_eq!(gt.sample(t), p);
    }

    #[test]
    fn non_increasing_timestamps_rejected() {
        let r = GroundTruthTrajectory::from_samples(vec![(0.0, Pose::identity()), (0.0, Pose::identity())]);
        assert!(r.is_err());
    }
}
