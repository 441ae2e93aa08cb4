//! Helpers shared by the integration suites. Not every suite uses every item.
#![allow(dead_code)]

use mcr_core::config::StackConfig;
use mcr_core::controller::{controller_step, ControllerConfig, PriorityWeights};
use mcr_core::kinematics::{whole_body_fk, ArmModel, BasePose, Pose, WholeBodyState, ARM_DOF};
use mcr_core::mapper::GripperState;
use mcr_core::service::{
    Buttons, CommandKind, CommandMsg, Frame, HelloMsg, InterfaceMsg, RawPose, SessionState,
    TelemetryMsg,
};
use mcr_core::mapper::{Axis, TeleopMode};
use mcr_core::sim::{plant_step, EnvironmentScript, PlantInput, PlantModel, SimState};
use nalgebra::{Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random whole-body state with the arm inside its joint limits.
pub fn random_state(rng: &mut ChaCha8Rng, arm: &ArmModel) -> WholeBodyState {
    let base = BasePose {
        x: rng.random_range(-5.0..5.0),
        y: rng.random_range(-5.0..5.0),
        yaw: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    };
    let mut q = arm.home;
    for (i, link) in arm.links().iter().enumerate() {
        q[i] = rng.random_range(link.lower..link.upper);
    }
    WholeBodyState::new(base, q)
}

/// Modified DH link written out as a 4x4 matrix.
#[rustfmt::skip]
pub fn dh_matrix(a: f64, d: f64, alpha: f64, theta: f64) -> Matrix4<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (st, ct) = theta.sin_cos();
    Matrix4::new(
        ct,      -st,      0.0,  a,
        st * ca,  ct * ca, -sa, -sa * d,
        st * sa,  ct * sa,  ca,  ca * d,
        0.0,      0.0,      0.0, 1.0,
    )
}

#[rustfmt::skip]
pub fn planar_base_matrix(x: f64, y: f64, yaw: f64) -> Matrix4<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix4::new(
        c,  -s,  0.0, x,
        s,   c,  0.0, y,
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
    )
}

/// End effector in the world by multiplying homogeneous matrices directly.
pub fn matrix_chain(state: &WholeBodyState, arm: &ArmModel) -> Matrix4<f64> {
    let b = state.base();
    let mut m = planar_base_matrix(b.x, b.y, b.yaw) * arm.mount.to_matrix();
    let q = state.arm();
    for (i, link) in arm.links().iter().enumerate() {
        m *= dh_matrix(link.a, link.d, link.alpha, q[i] + link.theta_offset);
    }
    m * arm.tool.to_matrix()
}

/// Translation error (m) and rotation geodesic (rad) between a pose and a
/// homogeneous matrix.
pub fn matrix_pose_error(pose: &Pose, m: &Matrix4<f64>) -> (f64, f64) {
    let dt = (pose.translation - m.fixed_view::<3, 1>(0, 3)).norm();
    let r = pose.rotation.to_rotation_matrix().into_inner();
    let rel = r.transpose() * m.fixed_view::<3, 3>(0, 0);
    // Angle from the skew part and the trace together stays accurate near 0.
    let skew = Vector3::new(
        rel[(2, 1)] - rel[(1, 2)],
        rel[(0, 2)] - rel[(2, 0)],
        rel[(1, 0)] - rel[(0, 1)],
    );
    let angle = (0.5 * skew.norm()).atan2(0.5 * (rel.trace() - 1.0));
    (dt, angle)
}

/// Controller and plant in closed loop with no environment contact.
pub struct Rig {
    pub controller: ControllerConfig,
    pub plant: PlantModel,
    pub env: EnvironmentScript,
    pub sim: SimState,
    pub control_dt: f64,
    pub substeps: usize,
}

impl Rig {
    pub fn new(config: &StackConfig) -> Self {
        let controller = config.controller_config();
        let mut env = EnvironmentScript::default();
        // Park the drawer far away so it cannot be touched.
        env.drawer.closed_front = [100.0, 100.0, 0.5];
        env.ball.position = [100.0, -100.0, 0.5];
        let robot = WholeBodyState::at_home(&controller.arm);
        let sim = SimState::new(robot, &env, config.rates.plant_dt(), 0);
        Self {
            plant: config.plant_model(),
            controller,
            env,
            sim,
            control_dt: config.rates.controller_dt(),
            substeps: config.rates.substeps(),
        }
    }

    pub fn ee(&self) -> Pose {
        whole_body_fk(&self.sim.robot, &self.controller.arm).unwrap()
    }

    /// One control tick followed by the plant substeps.
    pub fn tick(&mut self, target: &Pose, weights: &PriorityWeights) {
        let out = controller_step(&self.sim.robot, target, weights, &self.controller, self.control_dt)
            .unwrap();
        let input = PlantInput {
            qd_cmd: out.qd,
            ee_wrench: out.ee_wrench,
            base_wrench: Vector3::zeros(),
            gripper: GripperState::Open,
        };
        for _ in 0..self.substeps {
            self.sim = plant_step(&self.sim, &input, &self.plant, &self.env, self.sim.dt);
        }
    }

    pub fn base_xy(&self) -> Vector3<f64> {
        let b = self.sim.robot.base();
        Vector3::new(b.x, b.y, 0.0)
    }

    pub fn arm(&self) -> [f64; ARM_DOF] {
        self.sim.robot.arm().into()
    }
}

fn random_f64(rng: &mut ChaCha8Rng) -> f64 {
    // Mix magnitudes and exact zeros; the encoding carries raw bits.
    match rng.random_range(0..4) {
        0 => 0.0,
        1 => rng.random_range(-1.0..1.0),
        2 => rng.random_range(-1e6..1e6),
        _ => f64::from_bits(rng.random::<u64>() & !(0x7ffu64 << 52) | (rng.random_range(0..2046u64) << 52)),
    }
}

fn random_pose(rng: &mut ChaCha8Rng) -> RawPose {
    let mut quat = [0.0; 4];
    while quat.iter().map(|v| v * v).sum::<f64>() < 1e-6 {
        quat = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
    }
    RawPose {
        quat_wxyz: quat,
        translation: std::array::from_fn(|_| random_f64(rng)),
    }
}

fn non_negative(rng: &mut ChaCha8Rng) -> f64 {
    random_f64(rng).abs()
}

/// A random frame that the decoder must accept.
pub fn random_frame(rng: &mut ChaCha8Rng) -> Frame {
    match rng.random_range(0..4) {
        0 => Frame::Hello(HelloMsg {
            nonce: rng.random(),
            clock_ms: rng.random(),
        }),
        1 => Frame::Interface(InterfaceMsg {
            seq: rng.random(),
            timestamp_ms: rng.random(),
            pose: random_pose(rng),
            buttons: Buttons {
                mode_toggle: rng.random(),
                gripper_toggle: rng.random(),
                eta_arm: non_negative(rng),
                eta_base: non_negative(rng),
                impedance_scale: non_negative(rng),
            },
        }),
        2 => Frame::Command(CommandMsg {
            seq: rng.random(),
            timestamp_ms: rng.random(),
            kind: CommandKind::ALL[rng.random_range(0..CommandKind::ALL.len())],
        }),
        _ => {
            let sessions = [
                SessionState::Idle,
                SessionState::AttachedLocal,
                SessionState::DetachedManipulation,
                SessionState::DetachedLocomotion,
                SessionState::SafetyStop,
            ];
            let modes = [
                None,
                Some(TeleopMode::DetachedManipulation),
                Some(TeleopMode::DetachedLocomotion),
                Some(TeleopMode::AttachedLocal),
            ];
            let axes = [None, Some(Axis::X), Some(Axis::Y), Some(Axis::Yaw)];
            Frame::Telemetry(TelemetryMsg {
                seq: rng.random(),
                clock: random_f64(rng),
                q: std::array::from_fn(|_| random_f64(rng)),
                qd: std::array::from_fn(|_| random_f64(rng)),
                ee: random_pose(rng),
                session: sessions[rng.random_range(0..sessions.len())],
                mode: modes[rng.random_range(0..modes.len())],
                gripper: if rng.random() {
                    GripperState::Closed
                } else {
                    GripperState::Open
                },
                lock_axis: axes[rng.random_range(0..axes.len())],
                lock_engaged: rng.random(),
                flags: rng.random(),
                wrench: std::array::from_fn(|_| random_f64(rng)),
                dead_zone: random_f64(rng),
                saturation: random_f64(rng),
                ball: std::array::from_fn(|_| random_f64(rng)),
                drawer_opening: random_f64(rng),
            })
        }
    }
}

/// Interface frame carrying `pose` and default buttons.
pub fn interface_frame(seq: u32, timestamp_ms: u32, pose: &Pose) -> InterfaceMsg {
    InterfaceMsg {
        seq,
        timestamp_ms,
        pose: RawPose::from(pose),
        buttons: Buttons::default(),
    }
}
