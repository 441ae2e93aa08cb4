//! File-backed configuration of the whole stack. Every section is optional in
//! the TOML file and falls back to the built-in defaults.

use std::net::SocketAddr;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::{
    ControllerConfig, DynamicsConfig, DynamicsModel, ImpedanceParams, PriorityWeights,
    ResolutionParams,
};
use crate::error::ConfigError;
use crate::kinematics::ArmModel;
use crate::mapper::MapperParams;
use crate::sim::{PlantModel, PlantParams};

/// Replaces the host part of every bind address when set.
pub const BIND_HOST_ENV: &str = "MCR_BIND_HOST";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightPresets {
    pub manipulation: PriorityWeights,
    pub locomotion: PriorityWeights,
}

impl Default for WeightPresets {
    fn default() -> Self {
        Self {
            manipulation: PriorityWeights::manipulation(),
            locomotion: PriorityWeights::locomotion(),
        }
    }
}

/// Loop rates of the simulated stack (Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateConfig {
    pub plant_hz: f64,
    pub controller_hz: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            plant_hz: 500.0,
            controller_hz: 100.0,
        }
    }
}

impl RateConfig {
    /// Plant steps per controller tick.
    pub fn substeps(&self) -> usize {
        (self.plant_hz / self.controller_hz).round() as usize
    }

    pub fn plant_dt(&self) -> f64 {
        1.0 / self.plant_hz
    }

    pub fn controller_dt(&self) -> f64 {
        1.0 / self.controller_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// Datagram ingest of interface and command frames.
    pub udp_bind: String,
    /// Stream-framed frames both ways: telemetry out, interface/commands in.
    pub tcp_bind: String,
    /// Same stream over WebSocket binary messages, for browsers.
    pub ws_bind: String,
    pub staleness_ms: f64,
    /// Telemetry is emitted every `telemetry_divisor` control ticks.
    pub telemetry_divisor: u32,
    /// Per-subscriber telemetry backlog before the oldest frame is dropped.
    pub subscriber_queue: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            udp_bind: "127.0.0.1:47800".into(),
            tcp_bind: "127.0.0.1:47801".into(),
            ws_bind: "127.0.0.1:47802".into(),
            staleness_ms: 200.0,
            telemetry_divisor: 5,
            subscriber_queue: 64,
        }
    }
}

impl ServiceConfig {
    pub fn staleness(&self) -> f64 {
        self.staleness_ms * 1e-3
    }

    /// Parses a bind address, applying the host override from the environment.
    pub fn resolve(&self, addr: &str) -> Result<SocketAddr, ConfigError> {
        let host = std::env::var(BIND_HOST_ENV).ok();
        resolve_bind(addr, host.as_deref())
    }
}

fn resolve_bind(addr: &str, host: Option<&str>) -> Result<SocketAddr, ConfigError> {
    let bad = || ConfigError::Invalid(format!("bad bind address {addr:?}"));
    let parsed: SocketAddr = addr.parse().map_err(|_| bad())?;
    match host {
        Some(h) if !h.is_empty() => {
            let ip = h
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("bad {BIND_HOST_ENV} value {h:?}")))?;
            Ok(SocketAddr::new(ip, parsed.port()))
        }
        _ => Ok(parsed),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StackConfig {
    pub arm: ArmModel,
    pub dynamics: DynamicsConfig,
    pub impedance: ImpedanceParams,
    pub resolution: ResolutionParams,
    pub weights: WeightPresets,
    pub mapper: MapperParams,
    pub plant: PlantParams,
    pub rates: RateConfig,
    pub service: ServiceConfig,
}

impl StackConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_string(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.weights.manipulation.validate().map_err(|e| invalid(&e))?;
        self.weights.locomotion.validate().map_err(|e| invalid(&e))?;
        self.mapper.limits.validate().map_err(|e| invalid(&e))?;
        self.mapper
            .stiffness
            .validate_locomotion()
            .map_err(|e| invalid(&e))?;
        if !(self.mapper.alpha > 0.0 && self.mapper.alpha.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "mapper.alpha {} must be positive",
                self.mapper.alpha
            )));
        }
        let d = &self.dynamics;
        let positive = d
            .base_inertia
            .iter()
            .chain(&d.base_damping)
            .chain(&d.arm_inertia)
            .all(|v| *v > 0.0 && v.is_finite());
        if !positive {
            return Err(ConfigError::Invalid(
                "dynamics inertia and damping must be positive".into(),
            ));
        }
        let r = &self.rates;
        if !(r.plant_hz > 0.0 && r.controller_hz > 0.0 && r.controller_hz >= 20.0) {
            return Err(ConfigError::Invalid("rates must be positive, controller ≥ 20 Hz".into()));
        }
        let ratio = r.plant_hz / r.controller_hz;
        if ratio < 1.0 || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(ConfigError::Invalid(
                "plant rate must be an integer multiple of the controller rate".into(),
            ));
        }
        if !(self.service.staleness_ms > 0.0) || self.service.telemetry_divisor == 0 {
            return Err(ConfigError::Invalid(
                "service staleness and telemetry divisor must be positive".into(),
            ));
        }
        if self.plant.arm_lag < 0.0 || self.plant.contact_band <= 0.0 {
            return Err(ConfigError::Invalid("plant parameters out of range".into()));
        }
        Ok(())
    }

    pub fn dynamics_model(&self) -> DynamicsModel {
        DynamicsModel::from(&self.dynamics)
    }

    pub fn controller_config(&self) -> ControllerConfig {
        ControllerConfig {
            arm: self.arm.clone(),
            dynamics: self.dynamics_model(),
            impedance: self.impedance,
            resolution: self.resolution,
        }
    }

    pub fn plant_model(&self) -> PlantModel {
        PlantModel::new(self.arm.clone(), &self.dynamics_model(), self.plant)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("stack config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = StackConfig::from_toml_str("", "<empty>").unwrap();
        assert_eq!(c, StackConfig::default());
        assert_eq!(c.rates.substeps(), 5);
    }

    #[test]
    fn round_trip_through_toml() {
        let c = StackConfig::default();
        let back = StackConfig::from_toml_str(&c.to_toml(), "<rt>").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_override() {
        let c = StackConfig::from_toml_str(
            "[service]\nstaleness_ms = 150.0\n[mapper.limits]\ndead_zone = 0.04\nsaturation = 0.25\nstop_linear = 0.01\nstop_yaw = 0.02\n",
            "<partial>",
        )
        .unwrap();
        assert_eq!(c.service.staleness_ms, 150.0);
        assert_eq!(c.mapper.limits.dead_zone, 0.04);
        assert_eq!(c.service.udp_bind, ServiceConfig::default().udp_bind);
    }

    #[test]
    fn locomotion_constraint_enforced() {
        let err = StackConfig::from_toml_str(
            "[mapper.stiffness]\nlinear = [50.0, 50.0, 5.0]\nrotational = [0.0, 0.0, 10.0]\n",
            "<bad>",
        );
        assert!(matches!(err, Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn bind_host_override() {
        let a = resolve_bind("127.0.0.1:47800", Some("0.0.0.0")).unwrap();
        assert_eq!(a, "0.0.0.0:47800".parse().unwrap());
        let b = resolve_bind("127.0.0.1:47800", None).unwrap();
        assert_eq!(b.port(), 47800);
        assert!(resolve_bind("nonsense", None).is_err());
    }
}
