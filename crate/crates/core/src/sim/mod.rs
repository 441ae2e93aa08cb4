//! Deterministic plant: virtual-admittance base, lagged arm and a scripted
//! ball-and-drawer environment.

mod admittance;
mod env;
mod plant;

pub use admittance::{admittance_step, kinetic_energy};
pub use env::{BallSpec, DrawerSpec, EnvironmentScript};
pub use plant::{plant_step, BallState, PlantInput, PlantModel, PlantParams, SimFlags, SimState};
