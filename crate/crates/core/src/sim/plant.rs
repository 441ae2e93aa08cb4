use nalgebra::{Matrix3, SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::admittance::admittance_step;
use super::env::EnvironmentScript;
use crate::controller::DynamicsModel;
use crate::kinematics::{
    whole_body_fk, whole_body_jacobian, ArmModel, ArmVector, JointVector, Pose, WholeBodyState,
    ARM_DOF, BASE_DOF,
};
use crate::mapper::{GripperState, Wrench};

/// Where the ball is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BallState {
    Resting(Vector3<f64>),
    /// Offset from the tool point, in the tool frame.
    Attached(Vector3<f64>),
    /// Offset from the drawer's front-panel centre.
    InDrawer(Vector3<f64>),
    Dropped(Vector3<f64>),
}

/// Events raised during the most recent plant step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SimFlags {
    pub joint_limit: bool,
    pub contact: bool,
    pub grasped: bool,
    pub released: bool,
}

impl SimFlags {
    pub fn bits(&self) -> u16 {
        (self.joint_limit as u16)
            | (self.contact as u16) << 1
            | (self.grasped as u16) << 2
            | (self.released as u16) << 3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub robot: WholeBodyState,
    pub steps: u64,
    pub dt: f64,
    pub seed: u64,
    /// Wrench the environment applies to the tool (world frame).
    pub contact_wrench: Wrench,
    pub gripper: GripperState,
    pub ball: BallState,
    pub drawer_opening: f64,
    /// Velocity state of the base admittance `(ẋ, ẏ, ψ̇)`.
    pub admittance_velocity: Vector3<f64>,
    pub flags: SimFlags,
}

impl SimState {
    pub fn new(robot: WholeBodyState, env: &EnvironmentScript, dt: f64, seed: u64) -> Self {
        Self {
            robot,
            steps: 0,
            dt,
            seed,
            contact_wrench: Wrench::zero(),
            gripper: GripperState::Open,
            ball: BallState::Resting(Vector3::from(env.ball.position)),
            drawer_opening: env.drawer.initial_opening,
            admittance_velocity: Vector3::zeros(),
            flags: SimFlags::default(),
        }
    }

    pub fn clock(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn ball_position(&self, arm: &ArmModel, env: &EnvironmentScript) -> Vector3<f64> {
        match self.ball {
            BallState::Resting(p) | BallState::Dropped(p) => p,
            BallState::Attached(offset) => {
                let ee = whole_body_fk(&self.robot, arm).unwrap_or_default();
                ee.transform_point(&offset)
            }
            BallState::InDrawer(offset) => env.drawer.front_center(self.drawer_opening) + offset,
        }
    }
}

/// Commands applied to the plant for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantInput {
    /// Commanded whole-body velocity from the controller.
    pub qd_cmd: JointVector,
    /// Impedance wrench the arm exerts at the tool (world frame).
    pub ee_wrench: Vector6<f64>,
    /// `(F_x, F_y, τ_yaw)` driving the base admittance.
    pub base_wrench: Vector3<f64>,
    pub gripper: GripperState,
}

impl PlantInput {
    pub fn idle(gripper: GripperState) -> Self {
        Self {
            qd_cmd: JointVector::zeros(),
            ee_wrench: Vector6::zeros(),
            base_wrench: Vector3::zeros(),
            gripper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantParams {
    /// Time constant of the arm's first-order velocity tracking (s).
    pub arm_lag: f64,
    /// Extent of the contact band in front of the drawer panel (m).
    pub contact_band: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            arm_lag: 0.05,
            contact_band: 0.05,
        }
    }
}

/// Static description of the simulated robot.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub arm: ArmModel,
    pub base_inertia: Matrix3<f64>,
    pub base_damping: Matrix3<f64>,
    pub params: PlantParams,
}

impl PlantModel {
    pub fn new(arm: ArmModel, dynamics: &DynamicsModel, params: PlantParams) -> Self {
        Self {
            arm,
            base_inertia: dynamics.base_inertia,
            base_damping: dynamics.base_damping,
            params,
        }
    }
}

impl Default for PlantModel {
    fn default() -> Self {
        Self::new(
            ArmModel::default(),
            &DynamicsModel::default(),
            PlantParams::default(),
        )
    }
}

fn handle_gripper(
    state: &mut SimState,
    wanted: GripperState,
    ee: &Pose,
    model: &PlantModel,
    env: &EnvironmentScript,
) {
    if wanted == state.gripper {
        return;
    }
    state.gripper = wanted;
    match (wanted, state.ball) {
        (GripperState::Closed, BallState::Resting(p) | BallState::Dropped(p)) => {
            if (p - ee.translation).norm() <= env.grasp_radius {
                state.ball = BallState::Attached(ee.rotation.inverse() * (p - ee.translation));
                state.flags.grasped = true;
            }
        }
        (GripperState::Open, BallState::Attached(_)) => {
            let p = state.ball_position(&model.arm, env);
            let drawer = &env.drawer;
            state.ball = if drawer.over_interior(&p, state.drawer_opening) {
                let front = drawer.front_center(state.drawer_opening);
                let floor = front.z - 0.5 * drawer.panel_height + env.ball.radius;
                BallState::InDrawer(Vector3::new(p.x, p.y, floor) - front)
            } else {
                BallState::Dropped(Vector3::new(p.x, p.y, env.ball.radius))
            };
            state.flags.released = true;
        }
        _ => {}
    }
}

/// Pushes the arm joints back so that the tool does not pass through the
/// drawer panel: one damped least-squares correction on the position rows.
fn project_out(robot: &mut WholeBodyState, correction: &Vector3<f64>, arm: &ArmModel) {
    let Ok(j) = whole_body_jacobian(robot, arm) else {
        return;
    };
    let jp: SMatrix<f64, 3, ARM_DOF> = j.fixed_view::<3, ARM_DOF>(0, BASE_DOF).into_owned();
    let a = jp * jp.transpose() + Matrix3::identity() * 1e-6;
    if let Some(y) = a.lu().solve(correction) {
        let dq: ArmVector = jp.transpose() * y;
        for i in 0..ARM_DOF {
            robot.q[BASE_DOF + i] += dq[i];
        }
    }
}

/// Advances the plant by `dt`: base admittance, lagged arm tracking, joint
/// limits, gripper events and the drawer contact.
pub fn plant_step(
    state: &SimState,
    input: &PlantInput,
    model: &PlantModel,
    env: &EnvironmentScript,
    dt: f64,
) -> SimState {
    let mut next = state.clone();
    next.flags = SimFlags::default();
    let arm = &model.arm;

    let ee_before = whole_body_fk(&next.robot, arm).unwrap_or_default();
    handle_gripper(&mut next, input.gripper, &ee_before, model, env);

    next.admittance_velocity = admittance_step(
        &input.base_wrench,
        &next.admittance_velocity,
        &model.base_inertia,
        &model.base_damping,
        dt,
    );
    let blend = 1.0 - (-dt / model.params.arm_lag).exp();
    for i in 0..BASE_DOF {
        next.robot.qd[i] = next.admittance_velocity[i] + input.qd_cmd[i];
    }
    for i in BASE_DOF..BASE_DOF + ARM_DOF {
        next.robot.qd[i] += (input.qd_cmd[i] - next.robot.qd[i]) * blend;
    }
    next.robot.q += next.robot.qd * dt;

    let mut arm_q = next.robot.arm();
    if arm.clamp(&mut arm_q) {
        next.flags.joint_limit = true;
        for i in 0..ARM_DOF {
            if arm_q[i] != next.robot.q[BASE_DOF + i] {
                next.robot.qd[BASE_DOF + i] = 0.0;
            }
        }
        next.robot.q.fixed_rows_mut::<ARM_DOF>(BASE_DOF).copy_from(&arm_q);
    }

    // Drawer contact.
    let drawer = &env.drawer;
    let axis = drawer.axis();
    let ee = whole_body_fk(&next.robot, arm).unwrap_or_default();
    let (u, lateral, vertical) = drawer.local(&ee.translation);
    let s = next.drawer_opening;
    let in_window = drawer.within_panel(lateral, vertical)
        && u > s - model.params.contact_band
        && u <= s + 1e-3;
    next.contact_wrench = Wrench::zero();
    if in_window {
        let push = (-input.ee_wrench.fixed_rows::<3>(0).dot(&axis)).max(0.0);
        let speed = (push - drawer.resistance).max(0.0) / drawer.damping;
        next.drawer_opening = (s - speed * dt).clamp(0.0, drawer.max_opening);
        let penetration = next.drawer_opening - u;
        if penetration > 0.0 {
            project_out(&mut next.robot, &(axis * penetration), arm);
            let mut arm_q = next.robot.arm();
            if arm.clamp(&mut arm_q) {
                next.flags.joint_limit = true;
                next.robot.q.fixed_rows_mut::<ARM_DOF>(BASE_DOF).copy_from(&arm_q);
            }
        }
        if push > 0.0 {
            next.contact_wrench = Wrench::new(axis * push, Vector3::zeros());
            next.flags.contact = true;
        }
    }

    next.steps += 1;
    next
}
