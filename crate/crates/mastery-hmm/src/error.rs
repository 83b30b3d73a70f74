use thiserror::Error;

/// Errors produced by model construction, inference, training, and pipeline I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Model parameters violate a structural invariant (row sums, ranges, dimensions).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// An input value lies outside the domain an operation accepts.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Every state assigns zero probability to the observation at `step` (1-based).
    #[error("degenerate observation at step {step}: no state can emit it")]
    DegenerateObservation { step: usize },

    /// A state (1-based) received essentially no posterior mass during an update.
    #[error("degenerate state {state}: total posterior mass below 1e-12")]
    DegenerateState { state: usize },

    /// A metric has no defined value on the given data (e.g. AUC with one class).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// No expert move count is configured for the named level.
    #[error("missing expert baseline for level {level}")]
    MissingBaseline { level: u32 },

    /// A row in a CSV stream could not be parsed or violates a record invariant.
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    /// A persisted model file is malformed or carries an unsupported version.
    #[error("model format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
