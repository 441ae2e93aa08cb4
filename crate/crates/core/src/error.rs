use thiserror::Error;

/// Errors raised by the kinematic layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("joint {joint} at {value:.6} rad is outside [{lower:.6}, {upper:.6}]")]
    JointLimitViolation {
        joint: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("arm model must have exactly 7 links, got {0}")]
    WrongLinkCount(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("priority weight {name} must be positive, got {value}")]
    NonPositiveWeight { name: &'static str, value: f64 },
    #[error("whole-body inertia is singular")]
    SingularInertia,
    #[error("control period {0} s outside (0, 0.05]")]
    InvalidTimeStep(f64),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapperError {
    #[error("dead-zone radius {dead_zone} must be positive and below saturation radius {saturation}")]
    InvalidLimits { dead_zone: f64, saturation: f64 },
    #[error("every displacement component is zero")]
    AllZero,
    #[error("locomotion stiffness must have zero z, roll and pitch channels")]
    InvalidLocomotionStiffness,
    #[error("translation scale must be positive, got {0}")]
    InvalidScale(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VioError {
    #[error("invalid trajectory spec: {0}")]
    InvalidSpec(String),
    #[error("estimate stream is empty")]
    EmptyStream,
    #[error("invalid preset: {0}")]
    InvalidPreset(String),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
}

/// Wire-level decode failure.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed frame: {0}")]
    MalformedFrame(&'static str),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no trials given")]
    EmptyInput,
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization failure: {0}")]
    Serialize(#[from] serde_json::Error),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Vio(#[from] VioError),
    #[error(transparent)]
    Mapper(#[from] MapperError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}
