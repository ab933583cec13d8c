use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Errors surfaced by the library and mapped to process exit codes by the CLI.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{}: column `{column}`: {message}", path.display())]
    Schema {
        path: PathBuf,
        column: String,
        message: String,
    },
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Upstream(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad class of an error; decides the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    Upstream,
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn parse(path: impl AsRef<Path>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Upstream(_) => ErrorKind::Upstream,
            _ => ErrorKind::Validation,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Validation => 1,
            ErrorKind::Upstream => 2,
        }
    }

    pub fn path(&self) -> Option<&Path> {
        match self {
            Error::Io { path, .. } | Error::Parse { path, .. } | Error::Schema { path, .. } => {
                Some(path)
            }
            _ => None,
        }
    }

    /// One-line JSON record for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            error: ErrorKind,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            path: Option<&'a Path>,
            exit_code: i32,
        }
        let rec = Record {
            error: self.kind(),
            message: self.to_string(),
            path: self.path(),
            exit_code: self.exit_code(),
        };
        serde_json::to_string(&rec).unwrap_or_else(|_| String::from(r#"{"error":"validation"}"#))
    }
}

impl From<nlicur_core::entailment::AnnotateError> for Error {
    fn from(e: nlicur_core::entailment::AnnotateError) -> Self {
        use nlicur_core::entailment::AnnotateError;
        match e {
            AnnotateError::Scorer { .. } => Error::Upstream(e.to_string()),
            other => Error::Validation(other.to_string()),
        }
    }
}

impl From<nlicur_core::metrics::MetricsError> for Error {
    fn from(e: nlicur_core::metrics::MetricsError) -> Self {
        use nlicur_core::metrics::MetricsError;
        match e {
            MetricsError::Scorer { .. } => Error::Upstream(e.to_string()),
            other => Error::Validation(other.to_string()),
        }
    }
}

macro_rules! validation_from {
    ($($t:ty),*) => {
        $(impl From<$t> for Error {
            fn from(e: $t) -> Self {
                Error::Validation(e.to_string())
            }
        })*
    };
}

validation_from!(
    nlicur_core::corpus::ProfileError,
    nlicur_core::curation::CurationError,
    nlicur_core::entailment::StatsError,
    nlicur_core::selection::SelectionError,
    nlicur_core::aggregate::AggregateError,
    nlicur_core::humaneval::RatingError
);
