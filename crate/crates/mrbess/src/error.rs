use thiserror::Error;

/// Errors produced by dataset validation, the solver, tuning and I/O.
#[derive(Debug, Error)]
pub enum MrbessError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in {matrix} at row {row}, column {col}")]
    NonFinite {
        matrix: &'static str,
        row: usize,
        col: usize,
    },

    #[error("need at least 3 observations (the GIC penalty uses log log n), got n = {0}")]
    TooFewRows(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Gram matrix of the {size} active columns is numerically singular (condition number >= 1e12)")]
    SingularGram { size: usize },

    #[error("GIC penalty undefined for n = {n}, p = {p}: requires n >= 11 and p >= 2")]
    InvalidPenalty { n: usize, p: usize },

    #[error("validation split leaves {train_rows} training rows, fewer than s_max = {s_max}")]
    InfeasibleSplit { train_rows: usize, s_max: usize },

    #[error("all {0} tuning cells failed")]
    AllCellsFailed(usize),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("{path}: empty CSV file")]
    EmptyCsv { path: String },

    #[error("{path}: line {line} has {got} fields, expected {expected}")]
    RaggedCsv {
        path: String,
        line: usize,
        expected: usize,
        got: usize,
    },

    #[error("{path}: line {line}, column {col}: cannot parse '{token}' as a number")]
    BadNumber {
        path: String,
        line: usize,
        col: usize,
        token: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MrbessError>;
