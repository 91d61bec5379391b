//! Experiment harness for the `cuspcpm` solvers: configuration files and the commands
//! behind the `cuspcpm` binary.

pub mod commands;
pub mod config;

pub use commands::{cmd_converge, cmd_cp_check, cmd_eps_study, cmd_solve, cmd_surface_demo};
pub use config::{Command, ExperimentConfig};
