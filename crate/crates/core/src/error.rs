use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // series
    #[error("series `{0}` has fewer than two observed values")]
    AllMissing(String),
    #[error("month range out of series span: {0}")]
    OutOfRange(String),
    #[error("schema error at row {row}: {message}")]
    SchemaError { row: usize, message: String },
    #[error("duplicate observation for {destination} at {month}")]
    DuplicateObservation { destination: String, month: String },
    #[error("invalid month {year}-{month}")]
    InvalidMonth { year: i32, month: u32 },
    #[error("negative value {value} at index {index}")]
    NegativeValue { index: usize, value: f64 },
    #[error("series is empty")]
    EmptySeries,
    #[error("i/o error: {0}")]
    Io(String),

    // models
    #[error("series too short for {family}: need {required}, have {actual}")]
    SeriesTooShort { family: String, required: usize, actual: usize },
    #[error("{family} failed to converge: {diagnostics}")]
    NonConvergence { family: String, diagnostics: String },
    #[error("non-positive value at index {0} in multiplicative mode")]
    NonPositiveValue(usize),
    #[error("insufficient history: need {required} months, have {actual}")]
    InsufficientHistory { required: usize, actual: usize },
    #[error("series contains missing values; impute first")]
    MissingValues,
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    // hierarchy
    #[error("malformed hierarchy: {0}")]
    MalformedTree(String),
    #[error("bad top-down proportions: {0}")]
    BadProportions(String),
    #[error("error covariance W is singular")]
    SingularW,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    // combine
    #[error("validation table is empty")]
    EmptyTable,
    #[error("degenerate stacking design: {0}")]
    DegenerateDesign(String),
    #[error("model sets do not match: {0}")]
    ModelSetMismatch(String),

    // signals
    #[error("insufficient overlap at lag {lag}: {overlap} months")]
    InsufficientOverlap { lag: usize, overlap: usize },
    #[error("no keyword passes the correlation threshold {threshold}")]
    NoKeywordPasses { threshold: f64 },
    #[error("composite index is zero at {0}")]
    ZeroIndex(String),
    #[error("no usable flight data: {0}")]
    NoFlightData(String),
    #[error("no reference signal available for {0}")]
    NoSignal(String),

    // recovery
    #[error("regressor has fewer than two distinct values")]
    DegenerateX,
    #[error("missing month {0}")]
    MissingMonth(String),
    #[error("ill-conditioned normal equations (condition {0:e})")]
    IllConditioned(f64),
    #[error("non-positive trend value at t={0}")]
    NonPositiveTrend(usize),
    #[error("no model supplied prediction bounds")]
    NoBounds,

    // eval
    #[error("MASE scaling denominator is zero")]
    ZeroScale,
    #[error("lower bound exceeds upper bound at index {0}")]
    BadInterval(usize),
    #[error("mean of actuals is zero")]
    ZeroMeanActual,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("forecast and actuals share no months")]
    NoOverlap,
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
