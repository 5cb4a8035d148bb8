//! Command-line driver: offline approximation, closed-loop simulation,
//! oracle checks and benchmark suites.

use std::fmt;
use std::path::Path;

use serde::Serialize;

pub mod bench;
pub mod commands;
pub mod config;

pub use config::{Command, Overrides, RunConfig};

/// Exit code of usage errors: bad flags, unknown problems, missing inputs.
pub const EXIT_USAGE: i32 = 2;
/// Exit code of runs that completed but failed a check, or errored.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failed(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl From<ttfeedback::Error> for CliError {
    fn from(e: ttfeedback::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Caps the worker pool at `TTFEEDBACK_THREADS` when it is set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("TTFEEDBACK_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("TTFEEDBACK_THREADS must be a positive integer, got {v:?}")))?;
    // A second initialization in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs one resolved command, writing into `config.out`.
pub fn run(config: RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&config.out)
        .map_err(|e| CliError::Failed(format!("cannot create {}: {e}", config.out.display())))?;
    match config.command {
        Some(Command::Approximate) => commands::approximate(&config),
        Some(Command::Simulate) => commands::simulate_cmd(&config),
        Some(Command::SampleTest) => commands::sample_test(&config),
        Some(Command::Benchmark) => bench::run_suite(&config),
        None => Err(CliError::Usage("no command given".into())),
    }
}
