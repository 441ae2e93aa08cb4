//! Rigid transforms in SE(3).
//!
//! Rotations are kept as unit quaternions and renormalized after every
//! composition so that long control loops do not accumulate drift. Matrices
//! only appear at the boundary (`to_matrix` / `from_matrix`).

use nalgebra::{Matrix3, Matrix4, Quaternion, Rotation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

/// Rigid transform: rotate by `rotation`, then translate by `translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(UnitQuaternion::identity(), Vector3::new(x, y, z))
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    /// Roll-pitch-yaw about fixed x, y, z (applied in that order).
    pub fn from_rpy(translation: Vector3<f64>, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::new(
            UnitQuaternion::from_euler_angles(roll, pitch, yaw),
            translation,
        )
    }

    /// Builds a pose from raw quaternion components `(w, x, y, z)`, normalizing
    /// them. Returns `None` for a zero or non-finite quaternion.
    pub fn from_raw(quat_wxyz: [f64; 4], translation: [f64; 3]) -> Option<Self> {
        let q = Quaternion::new(quat_wxyz[0], quat_wxyz[1], quat_wxyz[2], quat_wxyz[3]);
        let n = q.norm();
        if !n.is_finite() || n < 1e-12 || translation.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Self::new(
            UnitQuaternion::new_unchecked(q / n),
            Vector3::from(translation),
        ))
    }

    pub fn quat_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: renormalize(self.rotation * other.rotation),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rot_inv = self.rotation.inverse();
        Pose {
            rotation: rot_inv,
            translation: -(rot_inv * self.translation),
        }
    }

    /// Delta `self⁻¹ ∘ to`, expressed in the frame of `self`.
    pub fn relative(&self, to: &Pose) -> Pose {
        self.inverse().compose(to)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(self.rotation.to_rotation_matrix().matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Pose {
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        let rot = Rotation3::from_matrix(&r);
        Pose {
            rotation: UnitQuaternion::from_rotation_matrix(&rot),
            translation: Vector3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]),
        }
    }

    /// Yaw of the rotation (rotation about world z in the rpy convention).
    pub fn yaw(&self) -> f64 {
        self.rotation.euler_angles().2
    }
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(q.into_inner())
}

/// Difference between two poses: geodesic rotation angle (rad) and translation
/// distance (m), reported separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseDistance {
    pub rotation: f64,
    pub translation: f64,
}

pub fn pose_distance(a: &Pose, b: &Pose) -> PoseDistance {
    PoseDistance {
        rotation: a.rotation.angle_to(&b.rotation),
        translation: (a.translation - b.translation).norm(),
    }
}

/// World-frame error twist `(Δp, rotation vector of R_target·R_actualᵀ)`.
pub fn pose_error(target: &Pose, actual: &Pose) -> Vector6<f64> {
    let dp = target.translation - actual.translation;
    let dr = (target.rotation * actual.rotation.inverse()).scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn yaw(a: f64) -> UnitQuaternion<f64> {
        UnitQuaternion::from_euler_angles(0.0, 0.0, a)
    }

    #[test]
    fn identity_composition() {
        let p = Pose::from_rpy(Vector3::new(0.3, -1.0, 2.0), 0.1, 0.2, 0.3);
        let r = Pose::identity().compose(&p);
        assert!(pose_distance(&r, &p).translation < 1e-15);
        assert!(pose_distance(&r, &p).rotation < 1e-12);
    }

    #[test]
    fn commuting_translations() {
        let r = Pose::from_translation(1.0, 0.0, 0.0).compose(&Pose::from_translation(0.0, 2.0, 0.0));
        assert_eq!(r.translation, Vector3::new(1.0, 2.0, 0.0));
    }

    #[test]
    fn yaw_then_translation_matches_matrix_product() {
        let a = Pose::from_rotation(yaw(FRAC_PI_2));
        let b = Pose::from_translation(1.0, 0.0, 0.0);
        let composed = a.compose(&b);
        let oracle = a.to_matrix() * b.to_matrix();
        assert!((composed.to_matrix() - oracle).norm() < 1e-12);
        assert!((composed.translation - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        assert!((composed.yaw() - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn inverse_of_translation_negates() {
        let p = Pose::from_translation(0.5, -0.2, 3.0).inverse();
        assert_eq!(p.translation, Vector3::new(-0.5, 0.2, -3.0));
        assert_eq!(Pose::identity().inverse(), Pose::identity());
    }

    #[test]
    fn relative_identities() {
        let p = Pose::from_rpy(Vector3::new(0.1, 0.2, 0.3), 0.4, -0.5, 0.6);
        let d = p.relative(&p);
        assert!(pose_distance(&d, &Pose::identity()).translation < 1e-12);
        assert!(pose_distance(&d, &Pose::identity()).rotation < 1e-7);
        let d = Pose::identity().relative(&p);
        assert!(pose_distance(&d, &p).translation < 1e-15);
    }

    #[test]
    fn from_raw_rejects_degenerate() {
        assert!(Pose::from_raw([0.0; 4], [0.0; 3]).is_none());
        assert!(Pose::from_raw([1.0, 0.0, 0.0, 0.0], [f64::NAN, 0.0, 0.0]).is_none());
        let p = Pose::from_raw([2.0, 0.0, 0.0, 0.0], [1.0, 2.0, 3.0]).unwrap();
        assert!((p.rotation.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pose_error_rotation_vector() {
        let target = Pose::from_rotation(yaw(FRAC_PI_2));
        let e = pose_error(&target, &Pose::identity());
        assert!((e[5] - FRAC_PI_2).abs() < 1e-12);
        assert!(e.fixed_rows::<5>(0).norm() < 1e-12);
    }
}
