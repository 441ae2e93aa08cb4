//! One scenario rollout: input source → session → mapper → controller →
//! plant, judged subtask by subtask.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::config::StackConfig;
use crate::controller::{controller_step, ControllerConfig};
use crate::error::HarnessError;
use crate::kinematics::{whole_body_fk, Pose, BASE_DOF};
use crate::mapper::{GripperState, MapperCommand};
use crate::service::{
    Frame, Inbox, Mailbox, RawPose, RobotFeedback, Session, SessionParams, SessionState,
    TelemetryFanout, TelemetryMsg,
};
use crate::sim::{plant_step, BallState, EnvironmentScript, PlantInput, SimFlags, SimState};

use super::scenario::{ScenarioSpec, SubtaskKind};
use super::source::{InputSource, Progress, Recording};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubtaskResult {
    pub kind: SubtaskKind,
    pub success: bool,
    /// Time from the subtask's start to success or timeout (s).
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub seed: u64,
    pub source: String,
    pub subtasks: Vec<SubtaskResult>,
    /// Sum of the durations of the successful subtasks (s).
    pub completion_time: f64,
    /// Planar base travel accumulated while the tool pressed on the drawer (m).
    pub contact_base_travel: f64,
    /// Interface frames discarded as stale or out of order.
    pub dropped_frames: u64,
    /// Whether the session was ever in safety stop.
    pub safety_stop: bool,
    pub duration: f64,
}

impl TrialMetrics {
    pub fn successes(&self) -> usize {
        self.subtasks.iter().filter(|s| s.success).count()
    }

    pub fn all_succeeded(&self) -> bool {
        self.subtasks.iter().all(|s| s.success)
    }

    pub fn subtask(&self, kind: SubtaskKind) -> Option<&SubtaskResult> {
        self.subtasks.iter().find(|s| s.kind == kind)
    }
}

/// Metrics plus the artifacts of one trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub metrics: TrialMetrics,
    /// CSV time series, one row per control tick.
    pub log: String,
    /// Every frame consumed, replayable through `ReplaySource`.
    pub recording: Recording,
}

pub const LOG_HEADER: &str = "t,subtask,session,x,y,yaw,q1,q2,q3,q4,q5,q6,q7,vx,vy,wz,\
ee_x,ee_y,ee_z,target_x,target_y,target_z,fx,fy,fz,gripper,ball_x,ball_y,ball_z,ball_held,\
drawer_opening,contact_force,flags";

/// Telemetry with everything zeroed and the session idle.
pub fn blank_telemetry() -> TelemetryMsg {
    TelemetryMsg {
        seq: 0,
        clock: 0.0,
        q: [0.0; 10],
        qd: [0.0; 10],
        ee: RawPose::from(&Pose::identity()),
        session: SessionState::Idle,
        mode: None,
        gripper: GripperState::Open,
        lock_axis: None,
        lock_engaged: false,
        flags: 0,
        wrench: [0.0; 6],
        dead_zone: 0.0,
        saturation: 0.0,
        ball: [0.0; 3],
        drawer_opening: 0.0,
    }
}

fn session_code(s: SessionState) -> u8 {
    match s {
        SessionState::Idle => 0,
        SessionState::AttachedLocal => 1,
        SessionState::DetachedManipulation => 2,
        SessionState::DetachedLocomotion => 3,
        SessionState::SafetyStop => 4,
    }
}

struct Judge<'a> {
    spec: &'a ScenarioSpec,
    env: &'a EnvironmentScript,
    index: usize,
    started: f64,
    previous_failed: bool,
    results: Vec<SubtaskResult>,
}

impl Judge<'_> {
    fn current(&self) -> Option<SubtaskKind> {
        self.spec.subtasks.get(self.index).copied()
    }

    fn progress(&self) -> Progress {
        Progress {
            index: self.index,
            subtask: self.current(),
            previous_failed: self.previous_failed,
        }
    }

    fn satisfied(&self, kind: SubtaskKind, state: &SimState) -> bool {
        match kind {
            SubtaskKind::GraspBall => matches!(state.ball, BallState::Attached(_)),
            SubtaskKind::LocomoteToDrawer => {
                let q = &state.robot.q;
                let d = (q[0] - self.env.approach[0]).hypot(q[1] - self.env.approach[1]);
                d <= self.spec.arrival_radius
            }
            SubtaskKind::DepositAndClose => {
                matches!(state.ball, BallState::InDrawer(_))
                    && state.drawer_opening < self.spec.closed_tolerance
            }
        }
    }

    /// Judges the current subtask at `clock`; returns whether the trial is over.
    fn update(&mut self, clock: f64, state: &SimState) -> bool {
        let Some(kind) = self.current() else {
            return true;
        };
        let elapsed = clock - self.started;
        let success = self.satisfied(kind, state);
        if success || elapsed >= self.spec.timeout {
            if !success {
                log::info!("subtask {} timed out after {elapsed:.2} s", kind.label());
            }
            self.results.push(SubtaskResult {
                kind,
                success,
                duration: elapsed,
            });
            self.previous_failed = !success;
            self.index += 1;
            self.started = clock;
        }
        self.index >= self.spec.subtasks.len()
    }
}

/// Runs one trial, publishing encoded telemetry frames on `telemetry`.
pub fn run_trial_with_telemetry(
    spec: &ScenarioSpec,
    source: &mut dyn InputSource,
    config: &StackConfig,
    seed: u64,
    telemetry: Arc<TelemetryFanout>,
) -> Result<TrialOutcome, HarnessError> {
    spec.validate()?;
    config
        .validate()
        .map_err(|e| HarnessError::InvalidScenario(e.to_string()))?;
    let env = spec.environment();
    let plant = config.plant_model();
    let base_controller = config.controller_config();
    let mut controller = base_controller.clone();
    let mut controller_scale = 1.0;
    let substeps = config.rates.substeps();
    let plant_dt = config.rates.plant_dt();
    let control_dt = config.rates.controller_dt();
    let divisor = config.service.telemetry_divisor.max(1) as u64;

    let mut session = Session::new(SessionParams {
        mapper: config.mapper,
        weights: config.weights,
        staleness: config.service.staleness(),
    })?;
    let mailbox = Mailbox::new();
    source.start(&mailbox, &telemetry)?;

    let mut state = SimState::new(spec.initial_state(&config.arm), &env, plant_dt, seed);
    let mut judge = Judge {
        spec,
        env: &env,
        index: 0,
        started: 0.0,
        previous_failed: false,
        results: Vec::new(),
    };
    let mut recording = Recording::new();
    let mut log = String::from(LOG_HEADER);
    log.push('\n');
    let mut view = blank_telemetry();
    let mut tick: u64 = 0;
    let mut telemetry_seq: u32 = 0;
    let mut flags = SimFlags::default();
    let mut wrench = [0.0; 6];
    let mut contact_travel = 0.0;
    let mut safety_stop = false;
    let max_ticks = ((spec.timeout * spec.subtasks.len() as f64 + 1.0) / control_dt).ceil() as u64;

    loop {
        let clock = state.clock();
        let ee = whole_body_fk(&state.robot, &config.arm)?;
        view = TelemetryMsg {
            seq: view.seq.wrapping_add(1),
            clock,
            q: state.robot.q.into(),
            qd: state.robot.qd.into(),
            ee: RawPose::from(&ee),
            session: session.state(),
            mode: session.mapper().mode(),
            gripper: state.gripper,
            lock_axis: session.mapper().lock().axis,
            lock_engaged: session.mapper().lock().engaged,
            flags: flags.bits(),
            wrench,
            dead_zone: config.mapper.limits.dead_zone,
            saturation: config.mapper.limits.saturation,
            ball: state.ball_position(&config.arm, &env).into(),
            drawer_opening: state.drawer_opening,
        };
        if tick.is_multiple_of(divisor) {
            telemetry_seq = telemetry_seq.wrapping_add(1);
            let msg = TelemetryMsg {
                seq: telemetry_seq,
                ..view
            };
            telemetry.publish(Arc::from(Frame::Telemetry(msg).encode()));
        }
        if judge.update(clock, &state) || tick >= max_ticks {
            break;
        }

        source.poll(clock, &view, &judge.progress(), &mailbox)?;
        let inbox: Inbox = mailbox.take();
        recording.push_inbox(clock, &inbox);
        let base_twist = Vector3::new(state.robot.qd[0], state.robot.qd[1], state.robot.qd[2]);
        let out = session.step(
            &inbox,
            clock,
            &RobotFeedback {
                ee,
                base_twist,
                measured_wrench: state.contact_wrench,
            },
        );
        safety_stop |= out.state == SessionState::SafetyStop;

        let mut input = PlantInput::idle(out.gripper);
        let mut target = ee.translation;
        match out.command {
            MapperCommand::EeTarget(goal) => {
                if out.impedance_scale != controller_scale {
                    controller = ControllerConfig {
                        impedance: base_controller.impedance.scaled(out.impedance_scale),
                        ..base_controller.clone()
                    };
                    controller_scale = out.impedance_scale;
                }
                let c = controller_step(&state.robot, &goal, &out.weights, &controller, control_dt)?;
                input.qd_cmd = c.qd;
                input.ee_wrench = c.ee_wrench;
                target = goal.translation;
                wrench = c.ee_wrench.into();
            }
            MapperCommand::BaseWrench(w) => {
                input.base_wrench = w.planar();
                wrench = w.to_vector().into();
            }
            MapperCommand::Hold => wrench = [0.0; 6],
        }

        flags = SimFlags::default();
        for _ in 0..substeps {
            let next = plant_step(&state, &input, &plant, &env, plant_dt);
            if next.flags.contact {
                let dx = next.robot.q[0] - state.robot.q[0];
                let dy = next.robot.q[1] - state.robot.q[1];
                contact_travel += dx.hypot(dy);
            }
            flags.joint_limit |= next.flags.joint_limit;
            flags.contact |= next.flags.contact;
            flags.grasped |= next.flags.grasped;
            flags.released |= next.flags.released;
            state = next;
        }

        write_row(&mut log, clock, &judge, &out.state, &state, &ee, &target, &input.ee_wrench, &view, flags);
        tick += 1;
    }

    while judge.current().is_some() {
        // Ran out of ticks: the rest count as failed attempts.
        let clock = state.clock();
        judge.started = judge.started.min(clock);
        judge.results.push(SubtaskResult {
            kind: judge.current().expect("checked"),
            success: false,
            duration: clock - judge.started,
        });
        judge.index += 1;
    }

    let results = judge.results;
    let completion_time = results.iter().filter(|r| r.success).map(|r| r.duration).sum();
    Ok(TrialOutcome {
        metrics: TrialMetrics {
            seed,
            source: source.label(),
            subtasks: results,
            completion_time,
            contact_base_travel: contact_travel,
            dropped_frames: session.dropped(),
            safety_stop,
            duration: state.clock(),
        },
        log,
        recording,
    })
}

/// Runs one trial with a private telemetry fan-out.
pub fn run_trial(
    spec: &ScenarioSpec,
    source: &mut dyn InputSource,
    config: &StackConfig,
    seed: u64,
) -> Result<TrialOutcome, HarnessError> {
    let hub = Arc::new(TelemetryFanout::new(config.service.subscriber_queue.max(1)));
    run_trial_with_telemetry(spec, source, config, seed, hub)
}

#[allow(clippy::too_many_arguments)]
fn write_row(
    log: &mut String,
    clock: f64,
    judge: &Judge<'_>,
    session: &SessionState,
    state: &SimState,
    ee: &Pose,
    target: &Vector3<f64>,
    ee_wrench: &Vector6<f64>,
    view: &TelemetryMsg,
    flags: SimFlags,
) {
    let q = &state.robot.q;
    let qd = &state.robot.qd;
    let held = matches!(state.ball, BallState::Attached(_)) as u8;
    let _ = write!(
        log,
        "{},{},{},{},{},{},",
        clock,
        judge.index,
        session_code(*session),
        q[0],
        q[1],
        q[2]
    );
    for i in BASE_DOF..BASE_DOF + 7 {
        let _ = write!(log, "{},", q[i]);
    }
    let _ = write!(
        log,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},",
        qd[0],
        qd[1],
        qd[2],
        ee.translation.x,
        ee.translation.y,
        ee.translation.z,
        target.x,
        target.y,
        target.z,
        ee_wrench[0],
        ee_wrench[1],
        ee_wrench[2],
        (state.gripper == GripperState::Closed) as u8
    );
    let _ = writeln!(
        log,
        "{},{},{},{},{},{},{}",
        view.ball[0],
        view.ball[1],
        view.ball[2],
        held,
        state.drawer_opening,
        state.contact_wrench.force.norm(),
        flags.bits()
    );
}
