use thiserror::Error;

/// Errors raised by the library. Verification failures are not errors; they
/// are carried in the respective report types.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("empty test-function family")]
    EmptyFamily,
    #[error("test-function family too fine for grid: level {level} has radius {radius} < {min_radius}")]
    FamilyTooFine { level: usize, radius: f64, min_radius: f64 },
    #[error("invalid enumeration: {0}")]
    InvalidEnumeration(String),
    #[error("start time {s} is not below the horizon {horizon}")]
    StartBeyondHorizon { s: f64, horizon: f64 },
    #[error("coefficient mode {mode} requires a measure argument")]
    MissingMeasure { mode: &'static str },
    #[error("operation requires linear coefficients, got {mode}")]
    NotLinear { mode: &'static str },
    #[error("coefficient field has dimension {field}, grid has dimension {grid}")]
    DimensionMismatch { field: usize, grid: usize },
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("CFL violation: dt = {dt} exceeds stable limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("negative weight {value} at cell {cell}")]
    NegativeWeight { cell: usize, value: f64 },
    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),
    #[error("time {0} is not a node of the curve")]
    NotANode(f64),
    #[error("Picard iteration did not converge in {iterations} iterations (last distance {last})")]
    PicardDiverged { iterations: usize, last: f64, trace: Vec<f64> },
    #[error("splice mismatch: continuation differs from the curve state at r = {r} by {deviation}")]
    SpliceMismatch { r: f64, deviation: f64 },
    #[error("inadmissible initial condition: {0}")]
    Inadmissible(String),
    #[error("empty candidate set")]
    EmptyCandidateSet,
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
