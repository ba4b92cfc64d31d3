use serde_json::json;

/// Anything that stops a run before its checks are decided.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] shadowkit_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl RunError {
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Core(e) => e.kind(),
            RunError::Io(_) => "io",
            RunError::Csv(_) => "csv",
            RunError::Json(_) => "json",
        }
    }

    /// 3 for anything the input could have avoided, 1 for the environment.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Io(_) | RunError::Csv(_) | RunError::Json(_) => 1,
            _ => 3,
        }
    }

    /// Single-line machine-readable form.
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() })
    }
}

pub(crate) fn config_err(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}
