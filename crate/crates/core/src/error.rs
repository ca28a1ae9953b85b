use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the closed-form model and the equilibrium solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("share {0} outside [0, 1]")]
    ShareOutOfRange(f64),
    #[error("singular expression: {0}")]
    Singular(&'static str),
    #[error("relocation probability mu = 0 is the degenerate analytic case; switching costs do not affect prices there")]
    DegenerateNoRelocation,
    #[error("no real roots of the coefficient system were found")]
    NoRoots,
}

/// Errors from the contract-data pipeline.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{path}: line {line}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("date {0} precedes the first portability announcement (1989-03-31)")]
    BeforeTimeline(chrono::NaiveDate),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Errors from the structural estimator.
#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("singular expression: {0}")]
    Singular(&'static str),
    #[error("not enough moments: {moments} moments for {params} parameters")]
    Underidentified { moments: usize, params: usize },
    #[error("instrument matrix is rank deficient (rank {rank} of {columns})")]
    RankDeficientInstruments { rank: usize, columns: usize },
    #[error("optimizer did not converge after {starts} starts (best objective {best_objective:e}, gradient norm {gradient_norm:e})")]
    NotConverged {
        starts: usize,
        best_objective: f64,
        gradient_norm: f64,
        best_params: Vec<f64>,
    },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Errors from sweep export/import.
#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("refusing to export an empty record list")]
    Empty,
    #[error(transparent)]
    Data(#[from] DataError),
}
