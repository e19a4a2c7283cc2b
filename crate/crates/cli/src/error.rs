use std::path::Path;

use lungnet::dataset::DatasetError;
use lungnet::explain::ExplainError;
use lungnet::imagecore::{ImageError, NiftiError};
use lungnet::metrics::MetricsError;
use lungnet::nn::NnError;
use lungnet::preprocess::PreprocessError;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Internal,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Internal => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Internal,
            message: message.into(),
        }
    }

    /// Prefixes the message with the file it concerns.
    pub fn at(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::data(format!("{}: {e}", path.display()))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::InvalidRatios(_) | DatasetError::InvalidSpec(_) => Self::usage(e.to_string()),
            _ => Self::data(e.to_string()),
        }
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        match e {
            ImageError::InvalidBand { .. } | ImageError::InvalidWindow { .. } => Self::usage(e.to_string()),
            _ => Self::data(e.to_string()),
        }
    }
}

impl From<NiftiError> for CliError {
    fn from(e: NiftiError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        match e {
            PreprocessError::InvalidParams(_) => Self::usage(e.to_string()),
            PreprocessError::EmptyMask => Self::data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::InvalidConfig(_) => Self::usage(e.to_string()),
            NnError::ShapeMismatch(_) | NnError::StaleRecord | NnError::InvalidArchitecture(_) | NnError::NoConvOutput => {
                Self::internal(e.to_string())
            }
            _ => Self::data(e.to_string()),
        }
    }
}

impl From<ExplainError> for CliError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::Nn(inner) => inner.into(),
            other => Self::internal(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::usage("x").kind.exit_code(), 1);
        assert_eq!(CliError::data("x").kind.exit_code(), 2);
        assert_eq!(CliError::internal("x").kind.exit_code(), 3);
        let e: CliError = NnError::BadMagic.into();
        assert_eq!(e.kind, ErrorKind::Data);
        let e: CliError = NnError::InvalidConfig("lr".into()).into();
        assert_eq!(e.kind, ErrorKind::Usage);
    }
}
