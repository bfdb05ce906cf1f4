//! Experiment pipelines behind the `grassmpc` command-line tool: data
//! generation, subspace design, closed-loop benchmarks and a self test.

pub mod benchmark;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod selftest;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
