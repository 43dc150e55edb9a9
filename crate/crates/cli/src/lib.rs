//! Configuration, result emission and command implementations behind the
//! `mmnoma` binary.

use thiserror::Error;

pub mod config;
pub mod output;
pub mod run;

/// One-line, machine-parseable failures: `error: <kind>: <detail>`.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("sim: {0}")]
    Sim(#[from] mmnoma::SimError),
}
