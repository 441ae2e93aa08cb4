use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{SVector, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::pose::Pose;
use crate::error::KinematicsError;

pub const ARM_DOF: usize = 7;

pub type ArmVector = SVector<f64, ARM_DOF>;

/// One revolute link in modified (Craig) Denavit-Hartenberg form:
/// `RotX(alpha) · TransX(a) · RotZ(theta + offset) · TransZ(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhLink {
    pub a: f64,
    pub d: f64,
    pub alpha: f64,
    #[serde(default)]
    pub theta_offset: f64,
    pub lower: f64,
    pub upper: f64,
    pub max_velocity: f64,
}

impl DhLink {
    pub fn transform(&self, theta: f64) -> Pose {
        let rx = Pose::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.alpha));
        let tx = Pose::from_translation(self.a, 0.0, 0.0);
        let rz = Pose::from_rotation(UnitQuaternion::from_axis_angle(
            &Vector3::z_axis(),
            theta + self.theta_offset,
        ));
        let tz = Pose::from_translation(0.0, 0.0, self.d);
        rx.compose(&tx).compose(&rz).compose(&tz)
    }
}

/// Serializable pose given as translation plus roll/pitch/yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSpec {
    pub translation: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl PoseSpec {
    pub fn to_pose(&self) -> Pose {
        Pose::from_rpy(
            Vector3::from(self.translation),
            self.rpy[0],
            self.rpy[1],
            self.rpy[2],
        )
    }
}

/// Kinematic description of the 7-DoF arm and how it sits on the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArmModelFile", into = "ArmModelFile")]
pub struct ArmModel {
    links: [DhLink; ARM_DOF],
    /// Flange-to-tool-centre-point transform.
    pub tool: Pose,
    /// Base-platform-to-arm-base transform.
    pub mount: Pose,
    pub home: ArmVector,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArmModelFile {
    links: Vec<DhLink>,
    tool: PoseSpec,
    mount: PoseSpec,
    home: Vec<f64>,
}

impl TryFrom<ArmModelFile> for ArmModel {
    type Error = KinematicsError;

    fn try_from(f: ArmModelFile) -> Result<Self, Self::Error> {
        let links: [DhLink; ARM_DOF] = f
            .links
            .try_into()
            .map_err(|v: Vec<DhLink>| KinematicsError::WrongLinkCount(v.len()))?;
        if f.home.len() != ARM_DOF {
            return Err(KinematicsError::WrongLinkCount(f.home.len()));
        }
        Ok(ArmModel {
            links,
            tool: f.tool.to_pose(),
            mount: f.mount.to_pose(),
            home: ArmVector::from_column_slice(&f.home),
        })
    }
}

impl From<ArmModel> for ArmModelFile {
    fn from(m: ArmModel) -> Self {
        let spec = |p: &Pose| {
            let (r, pi, y) = p.rotation.euler_angles();
            PoseSpec {
                translation: p.translation.into(),
                rpy: [r, pi, y],
            }
        };
        ArmModelFile {
            links: m.links.to_vec(),
            tool: spec(&m.tool),
            mount: spec(&m.mount),
            home: m.home.iter().copied().collect(),
        }
    }
}

impl Default for ArmModel {
    /// Franka-like link table. Joint 4's upper limit is relaxed to 0 so that
    /// the all-zero configuration is admissible.
    fn default() -> Self {
        let link = |a, d, alpha, lower, upper, max_velocity| DhLink {
            a,
            d,
            alpha,
            theta_offset: 0.0,
            lower,
            upper,
            max_velocity,
        };
        Self {
            links: [
                link(0.0, 0.333, 0.0, -2.8973, 2.8973, 2.175),
                link(0.0, 0.0, -FRAC_PI_2, -1.7628, 1.7628, 2.175),
                link(0.0, 0.316, FRAC_PI_2, -2.8973, 2.8973, 2.175),
                link(0.0825, 0.0, FRAC_PI_2, -3.0718, 0.0, 2.175),
                link(-0.0825, 0.384, -FRAC_PI_2, -2.8973, 2.8973, 2.61),
                link(0.0, 0.0, FRAC_PI_2, -0.0175, 3.7525, 2.61),
                link(0.088, 0.0, FRAC_PI_2, -2.8973, 2.8973, 2.61),
            ],
            // flange (0.107) plus hand (0.1034), hand rotated -45° about z
            tool: Pose::from_rpy(Vector3::new(0.0, 0.0, 0.2104), 0.0, 0.0, -FRAC_PI_4),
            mount: Pose::from_translation(0.2, 0.0, 0.4),
            home: ArmVector::from_column_slice(&[
                0.0,
                -FRAC_PI_4,
                0.0,
                -3.0 * FRAC_PI_4,
                0.0,
                FRAC_PI_2,
                FRAC_PI_4,
            ]),
        }
    }
}

/// Joint frames along the chain, used by the Jacobian: origin and z axis of
/// every joint plus the tool pose, all in the arm-base frame.
pub(crate) struct ArmChain {
    pub joint_frames: [Pose; ARM_DOF],
    pub tool: Pose,
}

impl ArmModel {
    pub fn links(&self) -> &[DhLink; ARM_DOF] {
        &self.links
    }

    pub fn check_limits(&self, q: &ArmVector) -> Result<(), KinematicsError> {
        const SLACK: f64 = 1e-9;
        for (joint, (link, &value)) in self.links.iter().zip(q.iter()).enumerate() {
            if !(value >= link.lower - SLACK && value <= link.upper + SLACK) {
                return Err(KinematicsError::JointLimitViolation {
                    joint,
                    value,
                    lower: link.lower,
                    upper: link.upper,
                });
            }
        }
        Ok(())
    }

    pub fn clamp(&self, q: &mut ArmVector) -> bool {
        let mut clamped = false;
        for (link, v) in self.links.iter().zip(q.iter_mut()) {
            if *v < link.lower {
                *v = link.lower;
                clamped = true;
            } else if *v > link.upper {
                *v = link.upper;
                clamped = true;
            }
        }
        clamped
    }

    pub(crate) fn chain(&self, q: &ArmVector) -> Result<ArmChain, KinematicsError> {
        self.check_limits(q)?;
        let mut frames = [Pose::identity(); ARM_DOF];
        let mut acc = Pose::identity();
        for (i, link) in self.links.iter().enumerate() {
            acc = acc.compose(&link.transform(q[i]));
            frames[i] = acc;
        }
        Ok(ArmChain {
            joint_frames: frames,
            tool: acc.compose(&self.tool),
        })
    }
}

/// End-effector pose in the arm-base frame.
pub fn arm_fk(q: &ArmVector, model: &ArmModel) -> Result<Pose, KinematicsError> {
    Ok(model.chain(q)?.tool)
}
