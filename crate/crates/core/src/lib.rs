pub mod error;
pub mod kinematics;
pub mod controller;
pub mod mapper;
pub mod sim;
pub mod vio;
pub mod config;
pub mod harness;
pub mod service;
