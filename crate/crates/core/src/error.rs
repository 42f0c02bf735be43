use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed ICD code {0:?}")]
    MalformedCode(String),

    #[error("{file}:{line}: {reason}")]
    Row {
        file: String,
        line: u64,
        reason: String,
    },

    #[error("{file}: missing column {column:?}")]
    MissingColumn { file: String, column: String },

    #[error("{file}:{line}: patient {patient_id:?} does not exist")]
    DanglingPatient {
        file: String,
        line: u64,
        patient_id: String,
    },

    #[error("duplicate patient id {0:?}")]
    DuplicatePatient(String),

    #[error("invalid mapping table {file}: {reason}")]
    Mapping { file: String, reason: String },

    #[error("empty cohort at stage {0}")]
    EmptyCohort(&'static str),

    #[error("invalid demographics for {patient_id}: {reason}")]
    InvalidDemographics { patient_id: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("cannot train: {0}")]
    Untrainable(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing stage dependency {}", .0.display())]
    MissingDependency(PathBuf),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn row(file: impl Into<String>, line: u64, reason: impl Into<String>) -> Self {
        Error::Row {
            file: file.into(),
            line,
            reason: reason.into(),
        }
    }
}
