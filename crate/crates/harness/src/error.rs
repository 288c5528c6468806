use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] wplap_core::error::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Configuration problems map to exit code 2.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_)
                | HarnessError::Core(wplap_core::error::Error::Config(_))
                | HarnessError::Core(wplap_core::error::Error::Parameter(_))
                | HarnessError::Core(wplap_core::error::Error::Domain(_))
        )
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
