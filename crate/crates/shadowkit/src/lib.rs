//! Configuration-driven experiments over `shadowkit-core`.
//!
//! A run takes one JSON document ([`ExperimentConfig`]), builds the named system from the
//! [`catalog`], executes one experiment and writes a CSV table, a JSON structure file and a
//! manifest. Output is a pure function of the config: no timestamps, no host data.

pub mod catalog;
pub mod config;
mod error;
pub mod experiments;
pub mod io;
pub mod parallel;

pub use config::{Experiment, ExperimentConfig};
pub use error::RunError;
pub use experiments::{run, Check, Outcome};

pub type Result<T> = std::result::Result<T, RunError>;
