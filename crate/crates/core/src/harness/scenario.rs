use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::kinematics::{ArmModel, ArmVector, BasePose, WholeBodyState};
use crate::sim::EnvironmentScript;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubtaskKind {
    GraspBall,
    LocomoteToDrawer,
    DepositAndClose,
}

impl SubtaskKind {
    pub fn label(self) -> &'static str {
        match self {
            SubtaskKind::GraspBall => "grasp-ball",
            SubtaskKind::LocomoteToDrawer => "locomote-to-drawer",
            SubtaskKind::DepositAndClose => "deposit-and-close",
        }
    }
}

/// The home-care task: grasp a ball, drive to a drawer, drop the ball in and
/// push the drawer shut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub subtasks: Vec<SubtaskKind>,
    /// Base start pose `(x, y, yaw)`.
    pub start_base: [f64; 3],
    /// Arm start configuration; the arm model's home if absent.
    pub start_arm: Option<[f64; 7]>,
    /// Distance along x from the start base position to the closed drawer
    /// front. Moves the drawer and the approach point together.
    pub drawer_distance: f64,
    /// Base-to-drawer standoff along the drawer axis at the approach point.
    pub approach_standoff: f64,
    /// Per-subtask timeout (s).
    pub timeout: f64,
    /// Proximity to the approach point counted as arrival (m).
    pub arrival_radius: f64,
    /// Drawer opening counted as closed (m).
    pub closed_tolerance: f64,
    pub environment: EnvironmentScript,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            subtasks: vec![
                SubtaskKind::GraspBall,
                SubtaskKind::LocomoteToDrawer,
                SubtaskKind::DepositAndClose,
            ],
            start_base: [0.0; 3],
            start_arm: None,
            drawer_distance: 3.0,
            approach_standoff: 0.85,
            timeout: 120.0,
            arrival_radius: 0.3,
            closed_tolerance: 0.01,
            environment: EnvironmentScript::default(),
        }
    }
}

impl ScenarioSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let spec: Self =
            toml::from_str(text).map_err(|e| HarnessError::InvalidScenario(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidScenario(m.to_string()));
        if self.subtasks.is_empty() {
            return bad("no subtasks");
        }
        let mut seen = Vec::new();
        for s in &self.subtasks {
            if seen.contains(s) {
                return bad("a subtask may appear only once");
            }
            seen.push(*s);
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return bad("timeout must be positive");
        }
        if !(self.drawer_distance > self.approach_standoff && self.approach_standoff > 0.0) {
            return bad("drawer must lie beyond the approach standoff");
        }
        if !(self.arrival_radius > 0.0 && self.closed_tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        let d = &self.environment.drawer;
        if !(d.initial_opening >= 0.0 && d.initial_opening <= d.max_opening) {
            return bad("drawer opening out of range");
        }
        Ok(())
    }

    /// Environment with the drawer placed `drawer_distance` ahead of the start.
    pub fn environment(&self) -> EnvironmentScript {
        let mut env = self.environment;
        env.drawer.closed_front[0] = self.start_base[0] + self.drawer_distance;
        let approach = env.drawer.closed_front() + env.drawer.axis() * self.approach_standoff;
        env.approach = [approach.x, approach.y];
        env
    }

    pub fn initial_state(&self, arm: &ArmModel) -> WholeBodyState {
        let q = self.start_arm.map(ArmVector::from).unwrap_or(arm.home);
        let [x, y, yaw] = self.start_base;
        WholeBodyState::new(BasePose { x, y, yaw }, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let spec = ScenarioSpec::default();
        spec.validate().unwrap();
        let env = spec.environment();
        assert_eq!(env.drawer.closed_front[0], 3.0);
        assert!((env.approach[0] - 2.15).abs() < 1e-12);
        assert!((env.approach[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn toml_round_trip() {
        let spec = ScenarioSpec::default();
        assert_eq!(ScenarioSpec::from_toml_str(&spec.to_toml()).unwrap(), spec);
        let partial = ScenarioSpec::from_toml_str("timeout = 60.0\n").unwrap();
        assert_eq!(partial.timeout, 60.0);
    }

    #[test]
    fn duplicate_subtasks_rejected() {
        let mut spec = ScenarioSpec::default();
        spec.subtasks.push(SubtaskKind::GraspBall);
        assert!(spec.validate().is_err());
    }
}
