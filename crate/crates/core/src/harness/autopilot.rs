//! Scripted synthetic operator. It moves a virtual handheld interface the way
//! a competent user would, watching only the telemetry a UI user sees, and
//! its true hand pose is reported through the simulated VIO error model.

use std::sync::Arc;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::kinematics::Pose;
use crate::mapper::{Axis, GripperState, MapperParams};
use crate::service::{
    Buttons, CommandKind, CommandMsg, Frame, HelloMsg, InterfaceMsg, Mailbox, RawPose,
    SessionState, TelemetryFanout, TelemetryMsg,
};
use crate::sim::EnvironmentScript;
use crate::vio::{GroundTruthTrajectory, VioErrorModel, VioPreset};

use super::scenario::SubtaskKind;
use super::source::{InputSource, Progress};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutopilotParams {
    /// Hand translation and rotation speed limits (m/s, rad/s).
    pub hand_speed: f64,
    pub hand_rate: f64,
    /// Pace at which the intended end-effector target moves (m/s).
    pub target_speed: f64,
    /// Integral gain on the observed end-effector error (1/s) and its bound.
    pub correction_gain: f64,
    pub correction_limit: f64,
    /// Observed error below which the integral correction is active (m).
    pub correction_window: f64,
    /// Time a tolerance must hold before a waypoint counts as reached (s).
    pub settle_time: f64,
    pub hover: f64,
    pub carry_height: f64,
    pub drop_height: f64,
    pub push_height: f64,
    /// How far beyond the closed panel the push target lies (m).
    pub push_depth: f64,
    /// Standoff in front of the open panel before the push (m).
    pub push_standoff: f64,
    /// Interface displacement used to drive the base, far and near (m).
    pub drive_far: f64,
    pub drive_near: f64,
    /// Remaining distance below which the near displacement is used (m).
    pub near_distance: f64,
    /// Expected coasting time after releasing the interface (s).
    pub stop_lead: f64,
    pub base_tolerance: f64,
    pub max_drive_attempts: u32,
    /// Time the lock may stay engaged after a release before re-centering (s).
    pub recenter_after: f64,
    /// Time constant of the drift compensation (s).
    pub compensation_time: f64,
}

impl Default for AutopilotParams {
    fn default() -> Self {
        Self {
            hand_speed: 0.4,
            hand_rate: 1.0,
            target_speed: 0.15,
            correction_gain: 1.5,
            correction_limit: 0.2,
            correction_window: 0.1,
            settle_time: 0.25,
            hover: 0.1,
            carry_height: 0.75,
            drop_height: 0.64,
            push_height: 0.56,
            push_depth: 0.05,
            push_standoff: 0.06,
            drive_far: 0.2,
            drive_near: 0.07,
            near_distance: 0.3,
            stop_lead: 0.5,
            base_tolerance: 0.03,
            max_drive_attempts: 6,
            recenter_after: 1.5,
            compensation_time: 0.5,
        }
    }
}

/// End-effector goals, resolved against the scene when a step begins.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Target {
    /// Above the ball by the given height.
    Ball(f64),
    /// Current end-effector position raised to the carry height.
    Carry,
    /// Over the middle of the exposed drawer interior at the given height.
    DrawerDrop(f64),
    /// In front of the open panel at the given height.
    DrawerFront(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Step {
    Section(SubtaskKind),
    Pause(f64),
    Command(CommandKind),
    AwaitState(SessionState),
    ToggleMode(SessionState),
    Latch,
    Reach(Target, f64),
    Push,
    Gripper(GripperState),
    Drive(usize),
    Halt,
    Done,
}

fn script() -> Vec<Step> {
    use Step::*;
    vec![
        Section(SubtaskKind::GraspBall),
        Pause(0.2),
        Command(CommandKind::Detach),
        AwaitState(SessionState::DetachedManipulation),
        Latch,
        Reach(Target::Ball(1.0), 0.015),
        Reach(Target::Ball(0.0), 0.006),
        Gripper(GripperState::Closed),
        Pause(0.3),
        Section(SubtaskKind::LocomoteToDrawer),
        Reach(Target::Carry, 0.02),
        ToggleMode(SessionState::DetachedLocomotion),
        Latch,
        Drive(0),
        Drive(1),
        Drive(0),
        Section(SubtaskKind::DepositAndClose),
        Halt,
        ToggleMode(SessionState::DetachedManipulation),
        Latch,
        Reach(Target::DrawerDrop(0.0), 0.02),
        Reach(Target::DrawerDrop(-1.0), 0.015),
        Gripper(GripperState::Open),
        Pause(0.3),
        Reach(Target::DrawerDrop(0.0), 0.03),
        Reach(Target::DrawerFront(0.0), 0.02),
        Reach(Target::DrawerFront(-1.0), 0.015),
        Push,
        Done,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum DrivePhase {
    Go,
    Coast,
    /// Re-centering: switch to manipulation, then back.
    Leave,
    Return,
}

/// Per-step scratch state.
#[derive(Debug, Clone, Copy, Default)]
struct StepState {
    entered: bool,
    since: f64,
    settled_since: Option<f64>,
    goal: Option<Vector3<f64>>,
    pressed_at: Option<f64>,
    drive: Option<DrivePhase>,
    phase_since: f64,
    attempts: u32,
}

pub struct Autopilot {
    params: AutopilotParams,
    mapper: MapperParams,
    env: EnvironmentScript,
    preset: VioPreset,
    vio: VioErrorModel,
    history: GroundTruthTrajectory,
    hand: Pose,
    hand_goal: Pose,
    last_clock: Option<f64>,
    emitted: u64,
    seq_interface: u32,
    seq_command: u32,
    buttons: Buttons,
    hello_sent: bool,
    steps: Vec<Step>,
    pc: usize,
    section: usize,
    step: StepState,
    // Manipulation frame: interface and end-effector poses at the latch.
    v0: Pose,
    ee0: Pose,
    reference: Vector3<f64>,
    correction: Vector3<f64>,
    goal_rotation: UnitQuaternion<f64>,
    integrate: bool,
    // Locomotion: commanded displacement and drift compensation.
    drive: Vector3<f64>,
    offset: Vector3<f64>,
}

const AXES: [Axis; 2] = [Axis::X, Axis::Y];

fn move_toward(from: &Vector3<f64>, to: &Vector3<f64>, max_step: f64) -> Vector3<f64> {
    let d = to - from;
    let n = d.norm();
    if n <= max_step {
        *to
    } else {
        from + d * (max_step / n)
    }
}

impl Autopilot {
    pub fn new(
        params: AutopilotParams,
        mapper: MapperParams,
        env: EnvironmentScript,
        preset: VioPreset,
        seed: u64,
    ) -> Result<Self, HarnessError> {
        let vio = VioErrorModel::new(preset.clone(), seed)?;
        let hand = Pose::from_translation(0.0, 0.0, 1.0);
        Ok(Self {
            params,
            mapper,
            env,
            preset,
            vio,
            history: GroundTruthTrajectory::new(),
            hand,
            hand_goal: hand,
            last_clock: None,
            emitted: 0,
            seq_interface: 0,
            seq_command: 0,
            buttons: Buttons::default(),
            hello_sent: false,
            steps: script(),
            pc: 0,
            section: 0,
            step: StepState::default(),
            v0: hand,
            ee0: Pose::identity(),
            reference: Vector3::zeros(),
            correction: Vector3::zeros(),
            goal_rotation: UnitQuaternion::identity(),
            integrate: false,
            drive: Vector3::zeros(),
            offset: Vector3::zeros(),
        })
    }

    /// True hand pose of the operator.
    pub fn hand(&self) -> Pose {
        self.hand
    }

    fn timestamp_ms(t: f64) -> u32 {
        (t * 1000.0).round().max(0.0) as u32
    }

    fn send(&self, mailbox: &Mailbox, frame: Frame) -> Result<(), HarnessError> {
        // Through the wire format, exactly as a networked client would.
        mailbox.post(Frame::decode(&frame.encode())?);
        Ok(())
    }

    fn command(&mut self, kind: CommandKind, clock: f64, mailbox: &Mailbox) -> Result<(), HarnessError> {
        self.seq_command += 1;
        let msg = CommandMsg {
            seq: self.seq_command,
            timestamp_ms: Self::timestamp_ms(clock),
            kind,
        };
        self.send(mailbox, Frame::Command(msg))
    }

    fn section_index(kind: SubtaskKind) -> usize {
        match kind {
            SubtaskKind::GraspBall => 0,
            SubtaskKind::LocomoteToDrawer => 1,
            SubtaskKind::DepositAndClose => 2,
        }
    }

    fn advance(&mut self) {
        self.pc += 1;
        self.step = StepState::default();
    }

    fn jump_to_section(&mut self, index: usize) {
        if let Some(pos) = self.steps.iter().position(|s| {
            matches!(s, Step::Section(k) if Self::section_index(*k) == index)
        }) {
            log::debug!("autopilot skipping to section {index}");
            self.pc = pos;
            self.step = StepState::default();
        }
    }

    fn ee_of(view: &TelemetryMsg) -> Pose {
        view.ee.to_pose().unwrap_or_default()
    }

    fn resolve(&self, target: Target, view: &TelemetryMsg) -> Vector3<f64> {
        let p = &self.params;
        let drawer = &self.env.drawer;
        let axis = drawer.axis();
        let s = view.drawer_opening;
        match target {
            Target::Ball(h) => Vector3::from(view.ball) + Vector3::z() * (h * p.hover),
            Target::Carry => {
                let ee = Self::ee_of(view).translation;
                Vector3::new(ee.x, ee.y, p.carry_height)
            }
            Target::DrawerDrop(h) => {
                let mut c = drawer.closed_front() + axis * (0.5 * s);
                c.z = if h < 0.0 { p.drop_height } else { p.carry_height };
                c
            }
            Target::DrawerFront(h) => {
                let mut c = drawer.closed_front() + axis * (s + p.push_standoff);
                c.z = if h < 0.0 { p.push_height } else { p.carry_height };
                c
            }
        }
    }

    fn latch(&mut self, view: &TelemetryMsg) {
        self.v0 = self.hand;
        self.ee0 = Self::ee_of(view);
        self.reference = self.ee0.translation;
        self.correction = Vector3::zeros();
        self.goal_rotation = self.ee0.rotation;
        self.drive = Vector3::zeros();
        self.offset = Vector3::zeros();
    }

    /// Hand pose that makes the manipulation mapping command `target`.
    fn hand_for_target(&self, target: &Pose) -> Pose {
        let mut delta = self.ee0.relative(target);
        delta.translation /= self.mapper.alpha;
        self.v0.compose(&delta)
    }

    fn manipulation_hand(&mut self, goal: &Vector3<f64>, view: &TelemetryMsg, dt: f64) {
        let p = self.params;
        self.reference = move_toward(&self.reference, goal, p.target_speed * dt);
        let error = goal - Self::ee_of(view).translation;
        // No integration against a joint limit: the error there is not drift.
        let limited = view.flags & 1 != 0;
        if self.integrate && !limited && self.reference == *goal && error.norm() < p.correction_window {
            self.correction += error * (p.correction_gain * dt);
            let n = self.correction.norm();
            if n > p.correction_limit {
                self.correction *= p.correction_limit / n;
            }
        }
        let target = Pose::new(self.goal_rotation, self.reference + self.correction);
        self.hand_goal = self.hand_for_target(&target);
    }

    fn locomotion_hand(&mut self, view: &TelemetryMsg, dt: f64) {
        // Drift shows up as a wrench on an axis the operator is not driving:
        // read the reported displacement off the wrench and ease the hand
        // against it. Easing keeps per-sample noise from being chased.
        let g = (dt / self.params.compensation_time).min(1.0);
        let k = &self.mapper.stiffness;
        let here = self.hand.translation - self.v0.translation;
        let here_yaw = (self.hand.rotation * self.v0.rotation.inverse()).scaled_axis().z;
        match view.lock_axis {
            Some(Axis::X) if self.drive.x == 0.0 && view.wrench[0] != 0.0 => {
                self.offset.x += g * (here.x - view.wrench[0] / k.linear[0] - self.offset.x);
            }
            Some(Axis::Y) if self.drive.y == 0.0 && view.wrench[1] != 0.0 => {
                self.offset.y += g * (here.y - view.wrench[1] / k.linear[1] - self.offset.y);
            }
            Some(Axis::Yaw) if view.wrench[5] != 0.0 && k.rotational[2] > 0.0 => {
                self.offset.z += g * (here_yaw - view.wrench[5] / k.rotational[2] - self.offset.z);
            }
            _ => {}
        }
        let t = self.v0.translation
            + Vector3::new(self.drive.x + self.offset.x, self.drive.y + self.offset.y, 0.0);
        let r = UnitQuaternion::from_scaled_axis(Vector3::z() * self.offset.z) * self.v0.rotation;
        self.hand_goal = Pose::new(r, t);
    }

    fn base_stopped(&self, view: &TelemetryMsg) -> bool {
        let v = Vector3::new(view.qd[0], view.qd[1], view.qd[2]);
        self.mapper.limits.is_stopped(&v)
    }

    /// Runs the current step; returns true when it is finished.
    fn run_step(
        &mut self,
        clock: f64,
        dt: f64,
        view: &TelemetryMsg,
        mailbox: &Mailbox,
    ) -> Result<bool, HarnessError> {
        let Some(step) = self.steps.get(self.pc).copied() else {
            return Ok(false);
        };
        if !self.step.entered {
            self.step.entered = true;
            self.step.since = clock;
        }
        let p = self.params;
        let in_manipulation = view.session == SessionState::DetachedManipulation;
        let in_locomotion = view.session == SessionState::DetachedLocomotion;
        let done = match step {
            Step::Section(kind) => {
                self.section = Self::section_index(kind);
                true
            }
            Step::Pause(secs) => clock - self.step.since >= secs,
            Step::Command(kind) => {
                self.command(kind, clock, mailbox)?;
                true
            }
            Step::AwaitState(s) => view.session == s,
            Step::ToggleMode(target) => {
                if view.session == target {
                    true
                } else {
                    let retry = self.step.pressed_at.is_none_or(|t| clock - t > 1.0);
                    if retry && view.session.is_detached() {
                        self.buttons.mode_toggle = self.buttons.mode_toggle.wrapping_add(1);
                        self.step.pressed_at = Some(clock);
                    }
                    false
                }
            }
            Step::Latch => {
                self.latch(view);
                true
            }
            Step::Reach(target, tol) => {
                let goal = match self.step.goal {
                    Some(g) => g,
                    None => {
                        let g = self.resolve(target, view);
                        self.step.goal = Some(g);
                        g
                    }
                };
                self.integrate = true;
                if in_manipulation {
                    self.manipulation_hand(&goal, view, dt);
                }
                let error = (goal - Self::ee_of(view).translation).norm();
                self.settled(clock, error < tol && self.reference == goal)
            }
            Step::Push => {
                let drawer = &self.env.drawer;
                let goal = *self.step.goal.get_or_insert_with(|| {
                    let mut g = drawer.closed_front() - drawer.axis() * p.push_depth;
                    g.z = p.push_height;
                    g
                });
                self.integrate = false;
                if in_manipulation {
                    self.manipulation_hand(&goal, view, dt);
                }
                view.drawer_opening < 0.5 * 0.01
            }
            Step::Gripper(state) => {
                if view.gripper == state {
                    true
                } else {
                    if self.step.pressed_at.is_none_or(|t| clock - t > 1.0) {
                        self.buttons.gripper_toggle = self.buttons.gripper_toggle.wrapping_add(1);
                        self.step.pressed_at = Some(clock);
                    }
                    false
                }
            }
            Step::Drive(axis) => view.session.is_detached() && self.drive_step(axis, clock, dt, view),
            Step::Halt => {
                self.drive = Vector3::zeros();
                if in_locomotion {
                    self.locomotion_hand(view, dt);
                }
                let released = view.lock_axis.is_none() && self.base_stopped(view);
                !in_locomotion || self.settled(clock, released)
            }
            Step::Done => false,
        };
        Ok(done)
    }

    fn settled(&mut self, clock: f64, ok: bool) -> bool {
        if !ok {
            self.step.settled_since = None;
            return false;
        }
        let since = *self.step.settled_since.get_or_insert(clock);
        clock - since >= self.params.settle_time
    }

    fn press_mode_toggle(&mut self, clock: f64) {
        if self.step.pressed_at.is_none_or(|t| clock - t > 1.0) {
            self.buttons.mode_toggle = self.buttons.mode_toggle.wrapping_add(1);
            self.step.pressed_at = Some(clock);
        }
    }

    fn set_phase(&mut self, phase: DrivePhase, clock: f64) {
        self.step.drive = Some(phase);
        self.step.phase_since = clock;
        self.step.pressed_at = None;
    }

    fn drive_step(&mut self, axis: usize, clock: f64, dt: f64, view: &TelemetryMsg) -> bool {
        let p = self.params;
        let remaining = self.env.approach[axis] - view.q[axis];
        let v = view.qd[axis];
        let phase = match self.step.drive {
            Some(phase) => phase,
            None => {
                self.set_phase(DrivePhase::Coast, clock);
                DrivePhase::Coast
            }
        };
        let mut finished = false;
        match phase {
            DrivePhase::Go => {
                let coast = v.abs() * p.stop_lead + 0.005;
                let overshoot = remaining * v < 0.0 && v.abs() > 0.02;
                let wrong_lock = view.lock_axis.is_some_and(|a| a != AXES[axis]);
                if remaining.abs() <= coast || overshoot || wrong_lock {
                    self.drive[axis] = 0.0;
                    self.set_phase(DrivePhase::Coast, clock);
                } else {
                    let amp = if remaining.abs() > p.near_distance {
                        p.drive_far
                    } else {
                        p.drive_near
                    };
                    self.drive[axis] = amp.copysign(remaining);
                }
            }
            DrivePhase::Coast => {
                self.drive[axis] = 0.0;
                let released = view.lock_axis.is_none() && self.base_stopped(view);
                if released {
                    if remaining.abs() < p.base_tolerance
                        || self.step.attempts >= p.max_drive_attempts
                    {
                        finished = true;
                    } else {
                        self.step.attempts += 1;
                        self.set_phase(DrivePhase::Go, clock);
                    }
                } else if clock - self.step.phase_since > p.recenter_after {
                    // The lock is held by drift the operator cannot see:
                    // leave and re-enter locomotion to re-zero the interface.
                    self.set_phase(DrivePhase::Leave, clock);
                }
            }
            DrivePhase::Leave => {
                self.drive[axis] = 0.0;
                if view.session == SessionState::DetachedManipulation {
                    self.set_phase(DrivePhase::Return, clock);
                } else {
                    self.press_mode_toggle(clock);
                }
            }
            DrivePhase::Return => {
                if view.session == SessionState::DetachedLocomotion {
                    self.latch(view);
                    self.set_phase(DrivePhase::Coast, clock);
                } else {
                    self.press_mode_toggle(clock);
                }
            }
        }
        if view.session == SessionState::DetachedLocomotion {
            self.locomotion_hand(view, dt);
        }
        finished
    }

    fn move_hand(&mut self, dt: f64) {
        let p = &self.params;
        let t = move_toward(&self.hand.translation, &self.hand_goal.translation, p.hand_speed * dt);
        let angle = self.hand.rotation.angle_to(&self.hand_goal.rotation);
        let max = p.hand_rate * dt;
        let r = if angle <= max {
            self.hand_goal.rotation
        } else {
            self.hand
                .rotation
                .slerp(&self.hand_goal.rotation, max / angle)
        };
        self.hand = Pose::new(r, t);
    }

    fn emit_samples(&mut self, clock: f64, mailbox: &Mailbox) -> Result<(), HarnessError> {
        let rate = self.preset.rate;
        let latency = self.preset.latency();
        let start = self.history.start();
        loop {
            let t = self.emitted as f64 / rate;
            if t > clock + 1e-9 {
                return Ok(());
            }
            let truth = self.history.sample((t - latency).max(start));
            let estimate = self.vio.corrupt(&truth);
            self.seq_interface += 1;
            let msg = InterfaceMsg {
                seq: self.seq_interface,
                timestamp_ms: Self::timestamp_ms(t),
                pose: RawPose::from(&estimate),
                buttons: self.buttons,
            };
            self.send(mailbox, Frame::Interface(msg))?;
            self.emitted += 1;
        }
    }
}

impl InputSource for Autopilot {
    fn start(&mut self, _mailbox: &Mailbox, _telemetry: &Arc<TelemetryFanout>) -> Result<(), HarnessError> {
        Ok(())
    }

    fn poll(
        &mut self,
        clock: f64,
        view: &TelemetryMsg,
        progress: &Progress,
        mailbox: &Mailbox,
    ) -> Result<(), HarnessError> {
        if !self.hello_sent {
            self.send(
                mailbox,
                Frame::Hello(HelloMsg {
                    nonce: 0x0A17_0F17,
                    clock_ms: Self::timestamp_ms(clock),
                }),
            )?;
            self.hello_sent = true;
        }
        let dt = self.last_clock.map_or(0.0, |l| clock - l);
        self.last_clock = Some(clock);

        if progress.previous_failed && progress.index > self.section && progress.index < 3 {
            self.jump_to_section(progress.index);
        }
        // Finish instantaneous steps within the same tick.
        for _ in 0..8 {
            if !self.run_step(clock, dt, view, mailbox)? {
                break;
            }
            log::debug!("t={clock:.2} finished {:?}", self.steps[self.pc]);
            self.advance();
        }
        self.move_hand(dt);
        self.history.push(clock, self.hand);
        self.emit_samples(clock, mailbox)
    }

    fn label(&self) -> String {
        format!("autopilot({})", self.preset.name)
    }
}
