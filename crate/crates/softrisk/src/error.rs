//! Crate-wide error type and exit-code mapping.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric input was NaN or infinite where a finite value is required.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A membership function violates `left <= apex_lo <= apex_hi <= right`.
    #[error("invalid membership function: {0}")]
    InvalidMf(String),

    /// An alpha grid is out of range or not strictly increasing.
    #[error("invalid alpha grid for {variable}/{term}: {reason}")]
    InvalidGrid {
        variable: String,
        term: String,
        reason: String,
    },

    /// A (variable, term) pair is not present in the fuzzy table.
    #[error("unknown column {variable}/{term}")]
    UnknownColumn { variable: String, term: String },

    /// A record is missing a value for a configured variable.
    #[error("record {record} has no value for variable {variable}")]
    ConfigMismatch { record: String, variable: String },

    /// Two soft sets do not share a universe.
    #[error("universe mismatch: operands are built over different patient sets")]
    UniverseMismatch,

    #[error("duplicate patient id {id}")]
    DuplicateId { id: String },

    /// Malformed dataset or label file content.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },

    /// A patient inside a rule's matched set has no label.
    #[error("patient {patient} in rule {rule_id} has no label")]
    MissingLabel { patient: String, rule_id: u64 },

    /// A variable contributed no usable soft-set level to rule enumeration.
    #[error("variable {variable} has no nonempty soft set; cannot enumerate rules")]
    Enumeration { variable: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A persisted artifact failed validation on load.
    #[error("invalid artifact {path}: {reason}")]
    Artifact { path: PathBuf, reason: String },

    #[error("artifact was produced with a different configuration (digest {found}, expected {expected})")]
    DigestMismatch { expected: String, found: String },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// An internal invariant did not hold. Always a bug.
    #[error("internal invariant violation: {0}")]
    Internal(String),
}

impl Error {
    pub fn stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        move |source| Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for validation errors, 2 for internal invariant
    /// violations.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Internal(_) => 2,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
