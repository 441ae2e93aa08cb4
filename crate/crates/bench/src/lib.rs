//! Shared fixtures for the criterion benches.

use mcr_core::config::StackConfig;
use mcr_core::kinematics::{whole_body_fk, Pose, WholeBodyState};
use mcr_core::sim::{EnvironmentScript, SimState};

/// Default stack at the home posture, with a target 5 cm ahead of the end effector.
pub struct Fixture {
    pub config: StackConfig,
    pub env: EnvironmentScript,
    pub state: WholeBodyState,
    pub target: Pose,
}

impl Default for Fixture {
    fn default() -> Self {
        let config = StackConfig::default();
        let state = WholeBodyState::at_home(&config.arm);
        let ee = whole_body_fk(&state, &config.arm).expect("home posture is valid");
        Self {
            target: ee.compose(&Pose::from_translation(0.05, 0.0, 0.0)),
            env: EnvironmentScript::default(),
            config,
            state,
        }
    }
}

impl Fixture {
    pub fn sim(&self) -> SimState {
        SimState::new(self.state, &self.env, self.config.rates.plant_dt(), 0)
    }
}
