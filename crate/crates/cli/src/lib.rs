//! Command-line runner for `dcprox`: JSON configs, CSV traces, JSON reports
//! and offline re-verification of stored traces.

pub mod atomic;
pub mod commands;
pub mod config;
pub mod report;
pub mod trace_csv;

use dcprox::DcError;

pub use commands::{cmd_check, cmd_compare, cmd_rates, cmd_run, GlobalOpts};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    /// `run` stopped at `max_iter`; `rates` had too few points.
    pub const INCOMPLETE: i32 = 2;
    /// Hypothesis violation, linesearch failure or divergence.
    pub const DIAGNOSTIC: i32 = 3;
    /// Bad config, incompatible solver/problem pair or malformed trace.
    pub const CONFIG: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("{0}")]
    Solver(#[from] DcError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::MalformedTrace(_) => exit::CONFIG,
            CliError::Io(_) => exit::CONFIG,
            CliError::Solver(e) => solver_error_code(e),
        }
    }
}

/// Errors raised before the first iteration are configuration errors.
pub fn solver_error_code(e: &DcError) -> i32 {
    match e {
        DcError::InertialParams(_)
        | DcError::Incompatible { .. }
        | DcError::InvalidParameter { .. }
        | DcError::DimensionMismatch { .. }
        | DcError::EmptyFeasibleSet(_)
        | DcError::InvalidInput(_) => exit::CONFIG,
        DcError::TooFewPoints { .. } | DcError::DegenerateWindow(_) => exit::INCOMPLETE,
        _ => exit::DIAGNOSTIC,
    }
}
