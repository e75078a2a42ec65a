//! Files, configuration, parallel execution and the command line for
//! [`smoothwave_core`].
//!
//! The `smoothwave` binary wraps [`cli::run`]. Every command that writes
//! files leaves a `manifest.json` next to them with the configuration, the
//! seed and a SHA-256 digest per file; passing that manifest back as
//! `--config` reproduces the run.

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod output;
pub mod stages;

pub use config::Config;
pub use error::CliError;
pub use exec::Workers;
