//! Configuration, dispatch and file formats behind the `twoscale` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{execute, Outcome};
pub use config::{parse_config, parse_config_for, Command, RunConfig};
pub use error::CliError;
pub use output::{emit_report_json, emit_trajectory_csv, trajectory_csv};

/// Environment variable that caps the worker thread count.
pub const THREADS_ENV: &str = "TWOSCALE_THREADS";

/// Sizes the global thread pool from [`THREADS_ENV`] when it is set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}
