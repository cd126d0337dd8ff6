use thiserror::Error;

/// Harness failure, tagged with the stage that produced it.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error("data ({stage}): {message}")]
    Data { stage: &'static str, message: String },
    #[error("runtime ({stage}): {message}")]
    Runtime { stage: &'static str, message: String },
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Data { .. } => 3,
            BenchError::Runtime { .. } => 4,
        }
    }

    pub fn data(stage: &'static str, e: impl std::fmt::Display) -> Self {
        BenchError::Data {
            stage,
            message: e.to_string(),
        }
    }

    pub fn runtime(stage: &'static str, e: impl std::fmt::Display) -> Self {
        BenchError::Runtime {
            stage,
            message: e.to_string(),
        }
    }
}

pub type BenchResult<T> = std::result::Result<T, BenchError>;
