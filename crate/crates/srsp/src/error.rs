//! Error type shared across the crate.
//!
//! Variants map onto the process exit codes used by the CLI: configuration
//! problems exit with 2, blow-up aborts with 3, I/O and snapshot-format
//! problems with 4, Picard non-convergence with 5.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SrspError {
    /// Rejected run configuration; `key` names the offending entry.
    #[error("config: {key}: {message}")]
    Config { key: String, message: String },

    /// Invalid grid parameters (dimension, point count, box length).
    #[error("grid: {0}")]
    Grid(String),

    /// Field data inconsistent with its grid, or non-finite entries.
    #[error("field: {0}")]
    Field(String),

    /// Mixed-state validation failure (weights, orthonormality, shapes).
    #[error("state: {0}")]
    State(String),

    /// Operation would materialise a dense kernel beyond the row guard.
    #[error("kernel of {rows} rows exceeds the dense-matrix guard of {limit}")]
    KernelTooLarge { rows: usize, limit: usize },

    /// Degenerate input to a ratio or fit (zero denominator and the like).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Fixed-point iteration failed to reach the tolerance.
    #[error("Picard window did not converge: {iterations} iterations, last update {last_update:.3e}, tolerance {tolerance:.3e}")]
    PicardDiverged {
        iterations: usize,
        last_update: f64,
        tolerance: f64,
    },

    /// The blow-up guard fired during a run.
    #[error("blow-up guard fired at t = {time:.6}: norm {norm:.6e} exceeded {threshold} times the initial value")]
    BlowUp { time: f64, norm: f64, threshold: f64 },

    /// Overflow or NaN during time stepping.
    #[error("state lost finiteness at t = {time:.6}")]
    NonFinite { time: f64 },

    /// One run of a mass ladder aborted, taking the whole report with it.
    #[error("limit ladder aborted: the run at mass {mass} failed at t = {time:.6}: {reason}")]
    LadderAbort {
        mass: f64,
        time: f64,
        reason: String,
    },

    /// Gram-Schmidt met a (numerically) dependent vector.
    #[error("orthonormalisation breakdown at component {index}: residual norm {norm:.3e}")]
    GramSchmidtBreakdown { index: usize, norm: f64 },

    /// Snapshot file violates the expected layout.
    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl SrspError {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        SrspError::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// Exit code the CLI reports for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            SrspError::Config { .. } => 2,
            SrspError::BlowUp { .. }
            | SrspError::NonFinite { .. }
            | SrspError::LadderAbort { .. } => 3,
            SrspError::Io(_) | SrspError::Snapshot(_) => 4,
            SrspError::PicardDiverged { .. } => 5,
            _ => 2,
        }
    }
}
