use nalgebra::{SMatrix, SVector, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::arm::{ArmModel, ArmVector, ARM_DOF};
use super::pose::Pose;
use crate::error::KinematicsError;

pub const BASE_DOF: usize = 3;
pub const WHOLE_BODY_DOF: usize = BASE_DOF + ARM_DOF;

pub type JointVector = SVector<f64, WHOLE_BODY_DOF>;
pub type Jacobian = SMatrix<f64, 6, WHOLE_BODY_DOF>;

/// Planar base pose `(x, y, yaw)` in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BasePose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

/// Positions and velocities of the 3 base coordinates followed by the 7 arm
/// joints. Base velocities are expressed in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WholeBodyState {
    pub q: JointVector,
    pub qd: JointVector,
}

impl WholeBodyState {
    pub fn new(base: BasePose, arm: ArmVector) -> Self {
        let mut q = JointVector::zeros();
        q[0] = base.x;
        q[1] = base.y;
        q[2] = base.yaw;
        q.fixed_rows_mut::<ARM_DOF>(BASE_DOF).copy_from(&arm);
        Self {
            q,
            qd: JointVector::zeros(),
        }
    }

    pub fn at_home(model: &ArmModel) -> Self {
        Self::new(BasePose::default(), model.home)
    }

    pub fn base(&self) -> BasePose {
        BasePose {
            x: self.q[0],
            y: self.q[1],
            yaw: self.q[2],
        }
    }

    pub fn arm(&self) -> ArmVector {
        self.q.fixed_rows::<ARM_DOF>(BASE_DOF).into_owned()
    }

    pub fn base_velocity(&self) -> Vector3<f64> {
        self.qd.fixed_rows::<BASE_DOF>(0).into_owned()
    }

    pub fn arm_velocity(&self) -> ArmVector {
        self.qd.fixed_rows::<ARM_DOF>(BASE_DOF).into_owned()
    }
}

/// Odometry transform of the omnidirectional base: lies in the ground plane.
pub fn base_fk(base: &BasePose) -> Pose {
    Pose::new(
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), base.yaw),
        Vector3::new(base.x, base.y, 0.0),
    )
}

/// World pose of the end effector: `base_fk · mount · arm_fk`.
pub fn whole_body_fk(state: &WholeBodyState, model: &ArmModel) -> Result<Pose, KinematicsError> {
    let arm = super::arm::arm_fk(&state.arm(), model)?;
    Ok(base_fk(&state.base()).compose(&model.mount.compose(&arm)))
}

/// Geometric Jacobian mapping `q̇` to the world-frame end-effector twist
/// `(v, ω)`, where `v` is the velocity of the tool point.
pub fn whole_body_jacobian(
    state: &WholeBodyState,
    model: &ArmModel,
) -> Result<Jacobian, KinematicsError> {
    let chain = model.chain(&state.arm())?;
    let base = base_fk(&state.base());
    let arm_base = base.compose(&model.mount);
    let tool = arm_base.compose(&chain.tool);
    let p = tool.translation;

    let mut j = Jacobian::zeros();
    j[(0, 0)] = 1.0;
    j[(1, 1)] = 1.0;
    // yaw about the base origin
    j[(0, 2)] = -(p.y - base.translation.y);
    j[(1, 2)] = p.x - base.translation.x;
    j[(5, 2)] = 1.0;

    for (i, frame) in chain.joint_frames.iter().enumerate() {
        let world = arm_base.compose(frame);
        let z = world.rotation * Vector3::z();
        let v = z.cross(&(p - world.translation));
        let col = BASE_DOF + i;
        j.fixed_view_mut::<3, 1>(0, col).copy_from(&v);
        j.fixed_view_mut::<3, 1>(3, col).copy_from(&z);
    }
    Ok(j)
}

/// Arm-only block of the Jacobian (6×7).
pub fn arm_block(j: &Jacobian) -> SMatrix<f64, 6, ARM_DOF> {
    j.fixed_view::<6, ARM_DOF>(0, BASE_DOF).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::pose::pose_distance;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn base_fk_identity_and_embedding() {
        assert_eq!(base_fk(&BasePose::default()), Pose::identity());
        let p = base_fk(&BasePose {
            x: 1.0,
            y: 2.0,
            yaw: FRAC_PI_2,
        });
        assert_eq!(p.translation, Vector3::new(1.0, 2.0, 0.0));
        assert!((p.yaw() - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn base_fk_matches_planar_rotation() {
        let (x, y, yaw) = (0.5, -0.3, 0.7);
        let m = base_fk(&BasePose { x, y, yaw }).to_matrix();
        let (s, c) = f64::sin_cos(yaw);
        #[rustfmt::skip]
        let oracle = nalgebra::Matrix4::new(
            c, -s, 0.0, x,
            s, c, 0.0, y,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        assert!((m - oracle).abs().max() < 1e-15);
    }

    #[test]
    fn base_translation_shifts_end_effector() {
        let model = ArmModel::default();
        let s0 = WholeBodyState::at_home(&model);
        let mut s1 = s0;
        s1.q[0] += 1.0;
        let a = whole_body_fk(&s0, &model).unwrap();
        let b = whole_body_fk(&s1, &model).unwrap();
        assert!((b.translation - a.translation - Vector3::x()).norm() < 1e-12);
        assert!(pose_distance(&a, &b).rotation < 1e-12);
    }

    #[test]
    fn base_at_origin_equals_mount_and_arm() {
        let model = ArmModel::default();
        let s = WholeBodyState::at_home(&model);
        let direct = model
            .mount
            .compose(&crate::kinematics::arm::arm_fk(&model.home, &model).unwrap());
        let d = pose_distance(&whole_body_fk(&s, &model).unwrap(), &direct);
        assert!(d.translation < 1e-15 && d.rotation < 1e-12);
    }

    #[test]
    fn base_x_column_is_pure_translation() {
        let model = ArmModel::default();
        let mut s = WholeBodyState::at_home(&model);
        s.q[2] = 1.1;
        let j = whole_body_jacobian(&s, &model).unwrap();
        assert_eq!(
            j.column(0).into_owned(),
            nalgebra::Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }
}
