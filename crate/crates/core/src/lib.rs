//! Highway driving RL with opposite-goal embedding rewards.
//!
//! The policy learns from kinematics states only; rewards come from the
//! distance between an embedded observation (text, image or video) and an
//! embedded description of the outcome to avoid.

pub mod cli;
pub mod embedding;
pub mod eval;
pub mod obs;
pub mod ppo;
pub mod reward;
pub mod run_config;
pub mod sim;
