//! Experiment runner for `tubeqer`: configuration, dispatch and artifacts.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::PathBuf;

use config::{ConfigError, Resolved};
use report::Outcome;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const ERROR: i32 = 1;
    pub const ASSERTION: i32 = 2;
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "output error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

/// Run an experiment and write its artifacts under [`Resolved::out_dir`].
pub fn execute(cfg: &Resolved) -> Result<(Outcome, Vec<PathBuf>), RunError> {
    let outcome = experiments::run(cfg).map_err(RunError::Config)?;
    let files = outcome.write(cfg, &cfg.out_dir()).map_err(RunError::Io)?;
    Ok((outcome, files))
}

pub fn exit_code(result: &Result<(Outcome, Vec<PathBuf>), RunError>) -> i32 {
    match result {
        Ok((o, _)) if o.passed() => exit::OK,
        Ok(_) => exit::ASSERTION,
        Err(_) => exit::ERROR,
    }
}
