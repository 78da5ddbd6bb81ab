//! Command-line front end for `soliton-flow`: config parsing, single runs,
//! sweeps and critical point listings, with CSV and SVG output.

pub mod config;
pub mod critical;
pub mod output;
pub mod plot;
pub mod runner;
pub mod sweep;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("model validation failed: {0}")]
    Validation(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Internal(_) => 5,
        }
    }
}

/// `--workers`, then `SOLITON_FLOW_WORKERS`, then the machine's parallelism.
pub fn worker_count(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return Ok(n.max(1));
    }
    match std::env::var("SOLITON_FLOW_WORKERS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|n| n.max(1))
            .map_err(|_| CliError::Config(format!("SOLITON_FLOW_WORKERS: cannot parse `{v}`"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}
