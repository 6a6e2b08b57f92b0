use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    /// Argument outside the mathematical domain of a special function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The optimizer hit a non-finite objective or gradient. Carries the
    /// last point at which the objective was still finite.
    #[error("optimization failed: {message}")]
    Optimization {
        message: String,
        last_valid_point: Vec<f64>,
    },

    /// Structurally valid input that cannot be fit (e.g. all-zero row weights).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A variational update produced a non-finite intermediate.
    #[error("inference error at node {node}{}: {message}", .neighbor.map(|j| format!(", neighbor {j}")).unwrap_or_default())]
    Inference {
        node: usize,
        neighbor: Option<usize>,
        message: String,
    },

    /// Quintile binning could not be performed on the named column.
    #[error("binning error for column '{column}': {message}")]
    Binning { column: String, message: String },

    /// Metric undefined for the given input (e.g. single-class AUC).
    #[error("metric error: {0}")]
    Metric(String),

    /// Invalid configuration or precondition violation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed input file; names the offending row when known.
    #[error("format error in {file}{}: {message}", .row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Format {
        file: String,
        row: Option<usize>,
        message: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
