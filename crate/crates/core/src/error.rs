use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("array of length {got} does not match a grid with {expected} nodes")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("operation requires the {expected} sector")]
    SectorMismatch { expected: &'static str },

    #[error("f has no zero in [{from}, {to}]")]
    NoZeroFound { from: f64, to: f64 },

    #[error("field has zero mass")]
    ZeroField,

    #[error("initial field is identically zero")]
    ZeroInitial,

    #[error("all {0} runs failed")]
    AllFailed(usize),

    #[error("test-map calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("inconsistent bracket: {0}")]
    InconsistentBracket(String),

    #[error("condition not met: {0}")]
    ConditionNotMet(String),

    #[error("mass mismatch: expected {expected}, found {found}")]
    MassMismatch { expected: f64, found: f64 },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
