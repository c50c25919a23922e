use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error(transparent)]
    Compute(#[from] normsol::Error),
    #[error("selfcheck failed: {0}")]
    Selfcheck(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Compute(normsol::Error::InvalidConfig(_) | normsol::Error::InvalidNonlinearity(_)) => 1,
            CliError::Compute(_) | CliError::Io(_) | CliError::Json(_) => 2,
            CliError::Selfcheck(_) => 3,
        }
    }
}
