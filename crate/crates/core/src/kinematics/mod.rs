//! SE(3) pose algebra and forward kinematics of the mobile manipulator.

mod arm;
mod pose;
mod whole_body;

pub use arm::{arm_fk, ArmModel, ArmVector, DhLink, PoseSpec, ARM_DOF};
pub use pose::{pose_distance, pose_error, Pose, PoseDistance};
pub use whole_body::{
    arm_block, base_fk, whole_body_fk, whole_body_jacobian, BasePose, Jacobian, JointVector,
    WholeBodyState, BASE_DOF, WHOLE_BODY_DOF,
};
