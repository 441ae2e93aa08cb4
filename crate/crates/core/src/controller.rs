//! Weighted whole-body Cartesian impedance control.
//!
//! The end-effector impedance wrench is turned into a reference twist through
//! a fixed compliance gain, then resolved into base and arm velocities by a
//! weighted damped least-squares solve. The weighting `W = Hᵀ M⁻¹ H` decides
//! how motion is shared: a large base penalty `η_B` keeps the platform still,
//! a large arm penalty `η_A` makes the platform carry the motion.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, Matrix3, Matrix6, SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::ControllerError;
use crate::kinematics::{
    pose_error, whole_body_fk, whole_body_jacobian, ArmModel, ArmVector, Jacobian, JointVector,
    Pose, WholeBodyState, ARM_DOF, BASE_DOF, WHOLE_BODY_DOF,
};

pub type WholeBodyMatrix = SMatrix<f64, WHOLE_BODY_DOF, WHOLE_BODY_DOF>;
pub type ArmMatrix = SMatrix<f64, ARM_DOF, ARM_DOF>;

/// Motion penalties for the arm (`eta_arm`, η_A) and the base (`eta_base`, η_B).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityWeights {
    pub eta_arm: f64,
    pub eta_base: f64,
}

impl PriorityWeights {
    pub fn new(eta_arm: f64, eta_base: f64) -> Result<Self, ControllerError> {
        let w = Self { eta_arm, eta_base };
        w.validate()?;
        Ok(w)
    }

    /// Arm moves, base stays put.
    pub fn manipulation() -> Self {
        Self {
            eta_arm: 1.0,
            eta_base: 100.0,
        }
    }

    /// Base carries the motion.
    pub fn locomotion() -> Self {
        Self {
            eta_arm: 100.0,
            eta_base: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.eta_arm > 0.0 && self.eta_arm.is_finite()) {
            return Err(ControllerError::NonPositiveWeight {
                name: "eta_arm",
                value: self.eta_arm,
            });
        }
        if !(self.eta_base > 0.0 && self.eta_base.is_finite()) {
            return Err(ControllerError::NonPositiveWeight {
                name: "eta_base",
                value: self.eta_base,
            });
        }
        Ok(())
    }
}

/// Optional Coriolis/centrifugal term `C_r(q_r, q̇_r) q̇_r` for the arm.
#[derive(Clone)]
pub struct CoriolisHook(pub Arc<dyn Fn(&ArmVector, &ArmVector) -> ArmVector + Send + Sync>);

impl fmt::Debug for CoriolisHook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CoriolisHook(..)")
    }
}

/// Virtual inertia/damping of the base plus arm inertia and gravity.
#[derive(Debug, Clone)]
pub struct DynamicsModel {
    pub base_inertia: Matrix3<f64>,
    pub base_damping: Matrix3<f64>,
    pub arm_inertia: ArmMatrix,
    pub arm_gravity: ArmVector,
    /// Quasi-static regime: `None` means the Coriolis term is zero.
    pub coriolis: Option<CoriolisHook>,
}

/// Diagonal form of [`DynamicsModel`] as it appears in config files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct DynamicsConfig {
    pub base_inertia: [f64; 3],
    pub base_damping: [f64; 3],
    pub arm_inertia: [f64; ARM_DOF],
    #[serde(default)]
    pub arm_gravity: [f64; ARM_DOF],
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            base_inertia: [20.0, 20.0, 4.0],
            base_damping: [40.0, 40.0, 8.0],
            arm_inertia: [1.0; ARM_DOF],
            arm_gravity: [0.0; ARM_DOF],
        }
    }
}

impl From<&DynamicsConfig> for DynamicsModel {
    fn from(c: &DynamicsConfig) -> Self {
        Self {
            base_inertia: Matrix3::from_diagonal(&Vector3::from(c.base_inertia)),
            base_damping: Matrix3::from_diagonal(&Vector3::from(c.base_damping)),
            arm_inertia: ArmMatrix::from_diagonal(&ArmVector::from(c.arm_inertia)),
            arm_gravity: ArmVector::from(c.arm_gravity),
            coriolis: None,
        }
    }
}

impl Default for DynamicsModel {
    fn default() -> Self {
        Self::from(&DynamicsConfig::default())
    }
}

impl DynamicsModel {
    /// Block-diagonal whole-body inertia `diag(M_v, M_r)`.
    pub fn inertia(&self) -> WholeBodyMatrix {
        let mut m = WholeBodyMatrix::zeros();
        m.fixed_view_mut::<BASE_DOF, BASE_DOF>(0, 0)
            .copy_from(&self.base_inertia);
        m.fixed_view_mut::<ARM_DOF, ARM_DOF>(BASE_DOF, BASE_DOF)
            .copy_from(&self.arm_inertia);
        m
    }
}

/// Diagonal Cartesian stiffness and damping at the end effector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImpedanceParams {
    pub stiffness: [f64; 6],
    pub damping: [f64; 6],
}

impl Default for ImpedanceParams {
    fn default() -> Self {
        Self {
            stiffness: [500.0, 500.0, 500.0, 50.0, 50.0, 50.0],
            damping: [20.0, 20.0, 20.0, 2.0, 2.0, 2.0],
        }
    }
}

impl ImpedanceParams {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            stiffness: self.stiffness.map(|k| k * factor),
            damping: self.damping.map(|d| d * factor.sqrt()),
        }
    }
}

/// Velocity-resolution gains and limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolutionParams {
    /// Damping λ of the least-squares solve.
    pub damping: f64,
    /// Twist per unit wrench: m/(N·s) for force, rad/(N·m·s) for torque.
    pub compliance_linear: f64,
    pub compliance_angular: f64,
    pub max_linear_speed: f64,
    pub max_angular_speed: f64,
    pub max_base_speed: f64,
    pub max_base_yaw_rate: f64,
}

impl Default for ResolutionParams {
    fn default() -> Self {
        Self {
            damping: 1e-3,
            compliance_linear: 0.006,
            compliance_angular: 0.06,
            max_linear_speed: 0.5,
            max_angular_speed: 1.0,
            max_base_speed: 1.0,
            max_base_yaw_rate: 1.0,
        }
    }
}

/// Commanded torques (reported) and the commanded whole-body velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerOutput {
    pub tau_base: Vector3<f64>,
    pub tau_arm: ArmVector,
    pub qd: JointVector,
    /// Impedance wrench at the end effector (world frame).
    pub ee_wrench: Vector6<f64>,
    pub twist_ref: Vector6<f64>,
}

impl ControllerOutput {
    pub fn zero() -> Self {
        Self {
            tau_base: Vector3::zeros(),
            tau_arm: ArmVector::zeros(),
            qd: JointVector::zeros(),
            ee_wrench: Vector6::zeros(),
            twist_ref: Vector6::zeros(),
        }
    }
}

/// `H = diag(η_B I₃, η_A I₇)`.
pub fn selection_matrix(w: &PriorityWeights) -> Result<WholeBodyMatrix, ControllerError> {
    w.validate()?;
    let mut h = WholeBodyMatrix::zeros();
    for i in 0..WHOLE_BODY_DOF {
        h[(i, i)] = if i < BASE_DOF { w.eta_base } else { w.eta_arm };
    }
    Ok(h)
}

/// `W(q) = Hᵀ M⁻¹(q) H`.
pub fn weighting_matrix(
    model: &DynamicsModel,
    w: &PriorityWeights,
) -> Result<WholeBodyMatrix, ControllerError> {
    let h = selection_matrix(w)?;
    let m_inv = Cholesky::new(model.inertia())
        .ok_or(ControllerError::SingularInertia)?
        .inverse();
    let w = h.transpose() * m_inv * h;
    Ok((w + w.transpose()) * 0.5)
}

/// Impedance law `F = K·e − D·ẋ` with the rotational error as a rotation vector.
pub fn cartesian_impedance(
    target: &Pose,
    actual: &Pose,
    actual_twist: &Vector6<f64>,
    params: &ImpedanceParams,
) -> Vector6<f64> {
    let e = pose_error(target, actual);
    Vector6::from_fn(|i, _| params.stiffness[i] * e[i] - params.damping[i] * actual_twist[i])
}

/// Weighted damped least squares:
/// `q̇ = W⁻¹Jᵀ (J W⁻¹ Jᵀ + λ²I)⁻¹ ẋ_ref`.
pub fn resolve_velocity(
    jacobian: &Jacobian,
    twist_ref: &Vector6<f64>,
    weighting: &WholeBodyMatrix,
    damping: f64,
) -> Result<JointVector, ControllerError> {
    let w_inv = Cholesky::new(*weighting)
        .ok_or(ControllerError::SingularInertia)?
        .inverse();
    let jw = w_inv * jacobian.transpose();
    let a: Matrix6<f64> = jacobian * jw + Matrix6::identity() * (damping * damping);
    let y = match Cholesky::new(a) {
        Some(ch) => ch.solve(twist_ref),
        None => a
            .lu()
            .solve(twist_ref)
            .ok_or(ControllerError::SingularInertia)?,
    };
    Ok(jw * y)
}

fn saturate(v: Vector3<f64>, max: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Scales `qd` uniformly so that no joint exceeds its velocity limit.
fn limit_joint_velocity(qd: &mut JointVector, arm: &ArmModel, params: &ResolutionParams) {
    let mut scale: f64 = 1.0;
    let planar = (qd[0] * qd[0] + qd[1] * qd[1]).sqrt();
    if planar > params.max_base_speed {
        scale = scale.min(params.max_base_speed / planar);
    }
    if qd[2].abs() > params.max_base_yaw_rate {
        scale = scale.min(params.max_base_yaw_rate / qd[2].abs());
    }
    for (i, link) in arm.links().iter().enumerate() {
        let v = qd[BASE_DOF + i].abs();
        if v > link.max_velocity {
            scale = scale.min(link.max_velocity / v);
        }
    }
    if scale < 1.0 {
        *qd *= scale;
    }
}

/// Everything the controller needs besides the state and target.
#[derive(Debug, Clone, Default)]
pub struct ControllerConfig {
    pub arm: ArmModel,
    pub dynamics: DynamicsModel,
    pub impedance: ImpedanceParams,
    pub resolution: ResolutionParams,
}

/// One control tick: impedance wrench → reference twist → weighted resolution.
pub fn controller_step(
    state: &WholeBodyState,
    ee_target: &Pose,
    weights: &PriorityWeights,
    config: &ControllerConfig,
    dt: f64,
) -> Result<ControllerOutput, ControllerError> {
    if !(dt > 0.0 && dt <= 0.05) {
        return Err(ControllerError::InvalidTimeStep(dt));
    }
    let actual = whole_body_fk(state, &config.arm)?;
    let j = whole_body_jacobian(state, &config.arm)?;
    let twist = j * state.qd;
    let wrench = cartesian_impedance(ee_target, &actual, &twist, &config.impedance);

    let res = &config.resolution;
    let lin = saturate(
        wrench.fixed_rows::<3>(0) * res.compliance_linear,
        res.max_linear_speed,
    );
    let ang = saturate(
        wrench.fixed_rows::<3>(3) * res.compliance_angular,
        res.max_angular_speed,
    );
    let twist_ref = Vector6::new(lin.x, lin.y, lin.z, ang.x, ang.y, ang.z);

    let w = weighting_matrix(&config.dynamics, weights)?;
    let mut qd = resolve_velocity(&j, &twist_ref, &w, res.damping)?;
    limit_joint_velocity(&mut qd, &config.arm, res);

    let tau = j.transpose() * wrench;
    let mut tau_arm: ArmVector = tau.fixed_rows::<ARM_DOF>(BASE_DOF).into_owned();
    tau_arm += config.dynamics.arm_gravity;
    if let Some(hook) = &config.dynamics.coriolis {
        tau_arm += (hook.0)(&state.arm(), &state.arm_velocity());
    }
    Ok(ControllerOutput {
        tau_base: tau.fixed_rows::<BASE_DOF>(0).into_owned(),
        tau_arm,
        qd,
        ee_wrench: wrench,
        twist_ref,
    })
}
