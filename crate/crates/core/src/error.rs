use thiserror::Error;

/// Errors produced by distribution construction, model updates, calibration
/// and file ingestion.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("empty sample")]
    EmptySample,

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("observation time must be >= 0, got {0}")]
    NegativeObservationTime(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("target RMST {target} months is unreachable for this family: {reason}")]
    TargetUnreachable { target: f64, reason: String },

    #[error("order-constrained sampling accepted only {accepted} of {requested} draws within {proposals} proposals")]
    AcceptanceRateTooLow {
        accepted: usize,
        requested: usize,
        proposals: usize,
    },

    #[error("invalid design config: {0}")]
    InvalidConfig(String),

    #[error("design config and calibration file do not match: {0}")]
    CalibrationMismatch(String),

    #[error("missing calibration: {0}")]
    MissingCalibration(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("{path}:{row}: {message}")]
    CsvParse {
        path: String,
        row: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
