//! Session state machine between the interface stream and the mapper.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::config::WeightPresets;
use crate::controller::PriorityWeights;
use crate::error::MapperError;
use crate::kinematics::Pose;
use crate::mapper::{GripperState, Mapper, MapperCommand, MapperParams, TeleopMode, Wrench};

use super::wire::{CommandKind, CommandMsg, HelloMsg, InterfaceMsg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionState {
    #[default]
    Idle,
    AttachedLocal,
    DetachedManipulation,
    DetachedLocomotion,
    SafetyStop,
}

impl SessionState {
    pub fn is_detached(self) -> bool {
        matches!(
            self,
            SessionState::DetachedManipulation | SessionState::DetachedLocomotion
        )
    }

    fn mode(self) -> Option<TeleopMode> {
        match self {
            SessionState::AttachedLocal => Some(TeleopMode::AttachedLocal),
            SessionState::DetachedManipulation => Some(TeleopMode::DetachedManipulation),
            SessionState::DetachedLocomotion => Some(TeleopMode::DetachedLocomotion),
            SessionState::Idle | SessionState::SafetyStop => None,
        }
    }
}

/// Frames gathered for one control tick: the newest interface frame, every
/// command in arrival order, and the latest handshake.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Inbox {
    pub hello: Option<HelloMsg>,
    pub interface: Option<InterfaceMsg>,
    pub commands: Vec<CommandMsg>,
}

impl Inbox {
    pub fn is_empty(&self) -> bool {
        self.hello.is_none() && self.interface.is_none() && self.commands.is_empty()
    }
}

/// What the session needs to know about the robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotFeedback {
    pub ee: Pose,
    /// Base velocity `(ẋ, ẏ, ψ̇)`.
    pub base_twist: Vector3<f64>,
    /// End-effector force/torque sensor reading.
    pub measured_wrench: Wrench,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionOutput {
    pub state: SessionState,
    pub command: MapperCommand,
    pub weights: PriorityWeights,
    pub impedance_scale: f64,
    pub gripper: GripperState,
}

impl SessionOutput {
    /// True if the tick asks for any robot motion.
    pub fn commands_motion(&self) -> bool {
        match self.command {
            MapperCommand::Hold => false,
            MapperCommand::BaseWrench(w) => !w.is_zero(),
            MapperCommand::EeTarget(_) => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionParams {
    pub mapper: MapperParams,
    pub weights: WeightPresets,
    /// Maximum age of the newest interface sample in a detached mode (s).
    pub staleness: f64,
}

impl Default for SessionParams {
    fn default() -> Self {
        Self {
            mapper: MapperParams::default(),
            weights: WeightPresets::default(),
            staleness: 0.2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    params: SessionParams,
    state: SessionState,
    mapper: Mapper,
    last_interface_seq: Option<u32>,
    last_command_seq: Option<u32>,
    /// Receiver clock minus sender clock (s).
    clock_offset: Option<f64>,
    latest_pose: Option<Pose>,
    /// Receiver-clock time at which the newest pose was sampled.
    latest_stamp: Option<f64>,
    detached_since: f64,
    mode_counter: Option<u8>,
    gripper_counter: Option<u8>,
    gripper: GripperState,
    eta_override: (f64, f64),
    impedance_scale: f64,
    dropped: u64,
}

impl Session {
    pub fn new(params: SessionParams) -> Result<Self, MapperError> {
        Ok(Self {
            mapper: Mapper::new(params.mapper)?,
            params,
            state: SessionState::Idle,
            last_interface_seq: None,
            last_command_seq: None,
            clock_offset: None,
            latest_pose: None,
            latest_stamp: None,
            detached_since: 0.0,
            mode_counter: None,
            gripper_counter: None,
            gripper: GripperState::Open,
            eta_override: (0.0, 0.0),
            impedance_scale: 1.0,
            dropped: 0,
        })
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn mapper(&self) -> &Mapper {
        &self.mapper
    }

    pub fn gripper(&self) -> GripperState {
        self.gripper
    }

    pub fn latest_pose(&self) -> Option<Pose> {
        self.latest_pose
    }

    /// Frames discarded as duplicates or out of order.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Age of the newest interface sample at `clock`, if any arrived.
    pub fn input_age(&self, clock: f64) -> Option<f64> {
        self.latest_stamp.map(|s| clock - s)
    }

    fn transition(&mut self, next: SessionState, clock: f64, ee: &Pose) {
        if next == self.state {
            return;
        }
        log::debug!("session {:?} -> {:?} at {clock:.3}", self.state, next);
        if next.is_detached() && !self.state.is_detached() {
            self.detached_since = clock;
        }
        self.state = next;
        match next.mode() {
            Some(mode) => self.mapper.enter(mode, self.latest_pose, *ee),
            None => self.mapper.halt(),
        }
    }

    fn toggle_mode(&mut self, clock: f64, ee: &Pose) {
        let next = match self.state {
            SessionState::DetachedManipulation => SessionState::DetachedLocomotion,
            SessionState::DetachedLocomotion => SessionState::DetachedManipulation,
            other => {
                log::debug!("mode toggle ignored in {other:?}");
                return;
            }
        };
        self.transition(next, clock, ee);
    }

    fn toggle_gripper(&mut self) {
        if self.state == SessionState::SafetyStop {
            log::debug!("gripper toggle ignored in safety stop");
            return;
        }
        self.gripper = self.gripper.toggled();
    }

    fn apply_command(&mut self, kind: CommandKind, clock: f64, ee: &Pose) {
        use SessionState::*;
        let next = match (kind, self.state) {
            (CommandKind::SafetyStop, _) => SafetyStop,
            (CommandKind::Resume, SafetyStop) => Idle,
            (_, SafetyStop) => {
                log::debug!("{kind:?} ignored until resume");
                return;
            }
            (CommandKind::Attach, Idle | DetachedManipulation | DetachedLocomotion) => AttachedLocal,
            (CommandKind::Detach, Idle | AttachedLocal) => DetachedManipulation,
            (CommandKind::ModeToggle, _) => return self.toggle_mode(clock, ee),
            (CommandKind::GripperToggle, _) => return self.toggle_gripper(),
            (kind, state) => {
                log::debug!("{kind:?} ignored in {state:?}");
                return;
            }
        };
        if next == SafetyStop {
            log::warn!("safety stop requested at {clock:.3}");
        }
        self.transition(next, clock, ee);
    }

    fn accept_seq(last: &mut Option<u32>, seq: u32, dropped: &mut u64) -> bool {
        if last.is_some_and(|l| seq <= l) {
            *dropped += 1;
            return false;
        }
        *last = Some(seq);
        true
    }

    fn counter_presses(last: &mut Option<u8>, now: u8) -> u8 {
        let presses = last.map_or(0, |l| now.wrapping_sub(l));
        *last = Some(now);
        presses
    }

    fn apply_interface(&mut self, msg: &InterfaceMsg, clock: f64, ee: &Pose) {
        if !Self::accept_seq(&mut self.last_interface_seq, msg.seq, &mut self.dropped) {
            return;
        }
        let Some(pose) = msg.pose.to_pose() else {
            return;
        };
        let sent = msg.timestamp_ms as f64 * 1e-3;
        let offset = *self.clock_offset.get_or_insert(clock - sent);
        self.latest_stamp = Some(sent + offset);
        self.latest_pose = Some(pose);
        self.mapper.latch_interface_if_unset(&pose);

        let b = &msg.buttons;
        self.eta_override = (b.eta_arm, b.eta_base);
        self.impedance_scale = if b.impedance_scale > 0.0 {
            b.impedance_scale
        } else {
            1.0
        };
        // An even number of presses since the last frame cancels out.
        if Self::counter_presses(&mut self.mode_counter, b.mode_toggle) % 2 == 1 {
            self.toggle_mode(clock, ee);
        }
        if Self::counter_presses(&mut self.gripper_counter, b.gripper_toggle) % 2 == 1 {
            self.toggle_gripper();
        }
    }

    fn weights(&self) -> PriorityWeights {
        let base = match self.state {
            SessionState::DetachedLocomotion => self.params.weights.locomotion,
            _ => self.params.weights.manipulation,
        };
        let (a, b) = self.eta_override;
        let w = PriorityWeights {
            eta_arm: if a > 0.0 { a } else { base.eta_arm },
            eta_base: if b > 0.0 { b } else { base.eta_base },
        };
        if w.validate().is_ok() {
            w
        } else {
            base
        }
    }

    fn is_stale(&self, clock: f64) -> bool {
        let fresh = self
            .latest_stamp
            .map_or(self.detached_since, |s| s.max(self.detached_since));
        clock - fresh > self.params.staleness
    }

    /// One tick: handshake, commands, the newest interface frame, the
    /// staleness rule, then the mapper.
    pub fn step(&mut self, inbox: &Inbox, clock: f64, robot: &RobotFeedback) -> SessionOutput {
        if let Some(h) = inbox.hello {
            self.clock_offset = Some(clock - h.clock_ms as f64 * 1e-3);
        }
        for c in &inbox.commands {
            if Self::accept_seq(&mut self.last_command_seq, c.seq, &mut self.dropped) {
                self.apply_command(c.kind, clock, &robot.ee);
            }
        }
        if let Some(msg) = &inbox.interface {
            self.apply_interface(msg, clock, &robot.ee);
        }
        if self.state.is_detached() && self.is_stale(clock) {
            log::warn!(
                "interface stream stale at {clock:.3} (age {:?}), safety stop",
                self.input_age(clock)
            );
            self.transition(SessionState::SafetyStop, clock, &robot.ee);
        }

        let command = match self.state {
            SessionState::Idle | SessionState::SafetyStop => MapperCommand::Hold,
            _ => {
                let pose = self.latest_pose;
                match self
                    .mapper
                    .step(pose.as_ref(), &robot.base_twist, &robot.measured_wrench)
                {
                    Ok(c) => c,
                    Err(e) => {
                        log::error!("mapper rejected input: {e}");
                        MapperCommand::Hold
                    }
                }
            }
        };
        SessionOutput {
            state: self.state,
            command,
            weights: self.weights(),
            impedance_scale: self.impedance_scale,
            gripper: self.gripper,
        }
    }
}

/// Functional form of [`Session::step`].
pub fn session_step(
    session: &mut Session,
    inbox: &Inbox,
    clock: f64,
    robot: &RobotFeedback,
) -> SessionOutput {
    session.step(inbox, clock, robot)
}
