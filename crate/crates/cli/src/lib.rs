//! Experiment configuration, runners and report writers behind the
//! `timetk` binary.

pub mod config;
pub mod report;
pub mod run;

pub use config::ExperimentConfig;
pub use run::{run, Command, Outcome};
