//! Error classes and their exit codes.

use std::fmt;
use std::process::ExitCode;

use promptopt_core::engine::EngineError;
use promptopt_core::gateway::ProviderError;
use promptopt_core::store::{DataError, DiversityError, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    /// Bad flags, config or prompt; a mismatched or existing run.
    Config,
    /// A model or scorer call failed.
    Provider,
    /// Unreadable or invalid dataset, prompt file or run record.
    Data,
}

impl Class {
    pub fn code(self) -> u8 {
        match self {
            Class::Config => 2,
            Class::Provider => 3,
            Class::Data => 4,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub class: Class,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            class: Class::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            class: Class::Data,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.class.code())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let class = match &e {
            EngineError::Gateway(_) | EngineError::EvaluationFailed { .. } => Class::Provider,
            EngineError::Store(_) | EngineError::Integrity(_) | EngineError::NoRun(_) | EngineError::Diversity(_) => {
                Class::Data
            }
            _ => Class::Config,
        };
        Self {
            class,
            message: e.to_string(),
        }
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<DiversityError> for Failure {
    fn from(e: DiversityError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<ProviderError> for Failure {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::Config(m) => Self::config(m),
            other => Self {
                class: Class::Provider,
                message: other.to_string(),
            },
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::data(e.to_string())
    }
}
