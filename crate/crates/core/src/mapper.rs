//! Interface-to-robot command mapping.
//!
//! In manipulation mode the interface delta since mode entry becomes an
//! end-effector target (translation scaled by `alpha`). In locomotion mode the
//! interface displacement becomes a virtual wrench through diagonal stiffness,
//! gated by a circular dead zone, capped at the saturation radius and
//! restricted to a single base axis at a time.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::MapperError;
use crate::kinematics::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TeleopMode {
    DetachedManipulation,
    DetachedLocomotion,
    AttachedLocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GripperState {
    #[default]
    Open,
    Closed,
}

impl GripperState {
    pub fn toggled(self) -> Self {
        match self {
            GripperState::Open => GripperState::Closed,
            GripperState::Closed => GripperState::Open,
        }
    }
}

/// Force (N) and torque (N·m).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl Wrench {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(force: Vector3<f64>, torque: Vector3<f64>) -> Self {
        Self { force, torque }
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            force: v.fixed_rows::<3>(0).into_owned(),
            torque: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        )
    }

    pub fn is_zero(&self) -> bool {
        self.force == Vector3::zeros() && self.torque == Vector3::zeros()
    }

    /// `(F_x, F_y, τ_yaw)`: the channels that reach the planar base.
    pub fn planar(&self) -> Vector3<f64> {
        Vector3::new(self.force.x, self.force.y, self.torque.z)
    }
}

/// Linear stiffness `K` (N/m) and rotational stiffness `C` (N·m/rad) about
/// x, y, z. Locomotion uses only `K_x`, `K_y` and the yaw (z) channel of `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StiffnessParams {
    pub linear: [f64; 3],
    pub rotational: [f64; 3],
}

impl Default for StiffnessParams {
    fn default() -> Self {
        Self {
            linear: [50.0, 50.0, 0.0],
            rotational: [0.0, 0.0, 10.0],
        }
    }
}

impl StiffnessParams {
    pub fn validate_locomotion(&self) -> Result<(), MapperError> {
        let all = self.linear.iter().chain(self.rotational.iter());
        if all.clone().any(|k| !(*k >= 0.0) || !k.is_finite()) {
            return Err(MapperError::InvalidLocomotionStiffness);
        }
        if self.linear[2] != 0.0 || self.rotational[0] != 0.0 || self.rotational[1] != 0.0 {
            return Err(MapperError::InvalidLocomotionStiffness);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocomotionLimits {
    /// Dead-zone radius `R_0` (m).
    pub dead_zone: f64,
    /// Saturation radius `R_m` (m).
    pub saturation: f64,
    /// Base counts as stopped below these speeds (m/s, rad/s).
    pub stop_linear: f64,
    pub stop_yaw: f64,
}

impl Default for LocomotionLimits {
    fn default() -> Self {
        Self {
            dead_zone: 0.05,
            saturation: 0.3,
            stop_linear: 0.01,
            stop_yaw: 0.02,
        }
    }
}

impl LocomotionLimits {
    pub fn validate(&self) -> Result<(), MapperError> {
        let ok = self.dead_zone > 0.0
            && self.dead_zone < self.saturation
            && self.saturation.is_finite()
            && self.stop_linear > 0.0
            && self.stop_yaw > 0.0;
        if ok {
            Ok(())
        } else {
            Err(MapperError::InvalidLimits {
                dead_zone: self.dead_zone,
                saturation: self.saturation,
            })
        }
    }

    /// Per-axis scale for the dominant-axis comparison: a 45° twist weighs as
    /// much as a full saturation-radius translation.
    pub fn normalization(&self) -> [f64; 3] {
        [1.0, 1.0, self.saturation / FRAC_PI_4]
    }

    pub fn is_stopped(&self, base_twist: &Vector3<f64>) -> bool {
        base_twist.xy().norm() < self.stop_linear && base_twist.z.abs() < self.stop_yaw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Yaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AxisLockState {
    pub axis: Option<Axis>,
    /// Dead zone has been crossed.
    pub engaged: bool,
}

/// Interface displacement `(Δx, Δy, Δz, Δφ, Δθ, Δψ)` in the world-aligned
/// interface frame, measured from `entry` to `now`.
pub fn displacement(entry: &Pose, now: &Pose) -> Vector6<f64> {
    let dp = now.translation - entry.translation;
    let dr = (now.rotation * entry.rotation.inverse()).scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

fn planar_norm(d: &Vector6<f64>) -> f64 {
    d[0].hypot(d[1])
}

/// End-effector target: the interface delta replayed from the initial
/// end-effector pose, with only its translation scaled by `alpha`.
pub fn manipulation_reference(
    v_initial: &Pose,
    v_now: &Pose,
    ee_initial_world: &Pose,
    alpha: f64,
) -> Result<Pose, MapperError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(MapperError::InvalidScale(alpha));
    }
    let mut delta = v_initial.relative(v_now);
    delta.translation *= alpha;
    Ok(ee_initial_world.compose(&delta))
}

/// Argmax of the normalized `|Δx|, |Δy|, |Δψ|`, ties broken x, then y, then yaw.
pub fn dominant_axis(d: &Vector6<f64>, normalization: [f64; 3]) -> Result<Axis, MapperError> {
    let scores = [
        (Axis::X, (d[0] * normalization[0]).abs()),
        (Axis::Y, (d[1] * normalization[1]).abs()),
        (Axis::Yaw, (d[5] * normalization[2]).abs()),
    ];
    let mut best = scores[0];
    for s in &scores[1..] {
        if s.1 > best.1 {
            best = *s;
        }
    }
    if best.1 == 0.0 {
        return Err(MapperError::AllZero);
    }
    Ok(best.0)
}

fn project(wrench: &Wrench, axis: Axis) -> Wrench {
    let mut out = Wrench::zero();
    match axis {
        Axis::X => out.force.x = wrench.force.x,
        Axis::Y => out.force.y = wrench.force.y,
        Axis::Yaw => out.torque.z = wrench.torque.z,
    }
    out
}

/// Applies the single-direction rule: release the lock once the base has
/// stopped and the interface is back inside the dead zone, acquire a lock on
/// the dominant axis when a wrench appears, and project onto the locked axis.
pub fn axis_lock_step(
    wrench: &Wrench,
    d: &Vector6<f64>,
    base_twist: &Vector3<f64>,
    lock: AxisLockState,
    limits: &LocomotionLimits,
) -> (Wrench, AxisLockState) {
    let mut lock = lock;
    if lock.axis.is_some()
        && limits.is_stopped(base_twist)
        && planar_norm(d) < limits.dead_zone
    {
        lock.axis = None;
    }
    if lock.axis.is_none() && !wrench.is_zero() {
        lock.axis = dominant_axis(d, limits.normalization()).ok();
    }
    match lock.axis {
        Some(axis) => (project(wrench, axis), lock),
        None => (Wrench::zero(), lock),
    }
}

/// Locomotion law: dead zone, per-channel saturation at `±R_m`, linear
/// stiffness, then the single-axis rule.
pub fn virtual_wrench(
    d: &Vector6<f64>,
    stiffness: &StiffnessParams,
    limits: &LocomotionLimits,
    lock: AxisLockState,
    base_twist: &Vector3<f64>,
) -> Result<(Wrench, AxisLockState), MapperError> {
    limits.validate()?;
    stiffness.validate_locomotion()?;
    let out_of_plane = Vector3::new(d[2], d[3], d[4]).norm();
    if out_of_plane > 0.0 {
        log::trace!("ignoring out-of-plane interface displacement {out_of_plane:.4}");
    }

    let mut lock = lock;
    lock.engaged = planar_norm(d) >= limits.dead_zone;
    let raw = if lock.engaged {
        let r = limits.saturation;
        let clamp = |v: f64| v.clamp(-r, r);
        Wrench::new(
            Vector3::from_fn(|i, _| stiffness.linear[i] * clamp(d[i])),
            Vector3::from_fn(|i, _| stiffness.rotational[i] * clamp(d[3 + i])),
        )
    } else {
        Wrench::zero()
    };
    Ok(axis_lock_step(&raw, d, base_twist, lock, limits))
}

/// Selects the wrench driving the base admittance for the active mode.
pub fn wrench_source(mode: TeleopMode, virtual_wrench: &Wrench, measured_ft: &Wrench) -> Wrench {
    match mode {
        TeleopMode::DetachedLocomotion => *virtual_wrench,
        TeleopMode::AttachedLocal => *measured_ft,
        TeleopMode::DetachedManipulation => Wrench::zero(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapperParams {
    pub alpha: f64,
    pub stiffness: StiffnessParams,
    pub limits: LocomotionLimits,
}

impl Default for MapperParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            stiffness: StiffnessParams::default(),
            limits: LocomotionLimits::default(),
        }
    }
}

/// What the mapper asks of the robot this tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapperCommand {
    /// Track this end-effector world pose.
    EeTarget(Pose),
    /// Drive the base admittance with this wrench; arm holds its joints.
    BaseWrench(Wrench),
    /// No motion.
    Hold,
}

/// Per-session mapping state machine.
#[derive(Debug, Clone)]
pub struct Mapper {
    pub params: MapperParams,
    mode: Option<TeleopMode>,
    interface_zero: Option<Pose>,
    ee_zero: Option<Pose>,
    lock: AxisLockState,
}

impl Mapper {
    pub fn new(params: MapperParams) -> Result<Self, MapperError> {
        params.limits.validate()?;
        params.stiffness.validate_locomotion()?;
        if !(params.alpha > 0.0) {
            return Err(MapperError::InvalidScale(params.alpha));
        }
        Ok(Self {
            params,
            mode: None,
            interface_zero: None,
            ee_zero: None,
            lock: AxisLockState::default(),
        })
    }

    pub fn mode(&self) -> Option<TeleopMode> {
        self.mode
    }

    pub fn lock(&self) -> AxisLockState {
        self.lock
    }

    /// Enters `mode`, re-zeroing the interface (and end-effector) latches.
    pub fn enter(&mut self, mode: TeleopMode, interface_now: Option<Pose>, ee_now: Pose) {
        self.mode = Some(mode);
        self.interface_zero = interface_now;
        self.ee_zero = Some(ee_now);
        self.lock = AxisLockState::default();
    }

    /// Disables motion until the next `enter`.
    pub fn halt(&mut self) {
        self.mode = None;
        self.interface_zero = None;
        self.ee_zero = None;
        self.lock = AxisLockState::default();
    }

    /// Sets the interface latch if mode entry happened before any pose arrived.
    pub fn latch_interface_if_unset(&mut self, pose: &Pose) {
        if self.mode.is_some() && self.interface_zero.is_none() {
            self.interface_zero = Some(*pose);
        }
    }

    pub fn step(
        &mut self,
        interface_now: Option<&Pose>,
        base_twist: &Vector3<f64>,
        measured_ft: &Wrench,
    ) -> Result<MapperCommand, MapperError> {
        let Some(mode) = self.mode else {
            return Ok(MapperCommand::Hold);
        };
        if let Some(p) = interface_now {
            self.latch_interface_if_unset(p);
        }
        match mode {
            TeleopMode::AttachedLocal => Ok(MapperCommand::BaseWrench(wrench_source(
                mode,
                &Wrench::zero(),
                measured_ft,
            ))),
            TeleopMode::DetachedManipulation => {
                match (self.interface_zero, interface_now, self.ee_zero) {
                    (Some(v0), Some(v), Some(ee0)) => Ok(MapperCommand::EeTarget(
                        manipulation_reference(&v0, v, &ee0, self.params.alpha)?,
                    )),
                    (_, _, Some(ee0)) => Ok(MapperCommand::EeTarget(ee0)),
                    _ => Ok(MapperCommand::Hold),
                }
            }
            TeleopMode::DetachedLocomotion => {
                let (Some(v0), Some(v)) = (self.interface_zero, interface_now) else {
                    return Ok(MapperCommand::BaseWrench(Wrench::zero()));
                };
                let d = displacement(&v0, v);
                let (w, lock) = virtual_wrench(
                    &d,
                    &self.params.stiffness,
                    &self.params.limits,
                    self.lock,
                    base_twist,
                )?;
                self.lock = lock;
                Ok(MapperCommand::BaseWrench(wrench_source(mode, &w, measured_ft)))
            }
        }
    }
}
