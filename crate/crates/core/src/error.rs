use std::path::PathBuf;

/// Errors surfaced by the design game, the trainer and the file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition (out-of-bounds design,
    /// step after done, shape mismatch, ...).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("variant generation exhausted for machine {base_id}: {attempts} consecutive draws had no feasible design")]
    GenerationExhausted { base_id: u8, attempts: usize },

    #[error("{path}:{line}: malformed file: {message}")]
    MalformedFile {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: version mismatch: expected `{expected}`, found `{found}`")]
    VersionMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("training diverged at update {update}: {detail}")]
    TrainingDiverged { update: u64, detail: String },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("consistency failure: {0}")]
    Consistency(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::MalformedFile {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code: 1 for anything the operator can fix in the inputs,
    /// 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ContractViolation(_)
            | Error::MalformedFile { .. }
            | Error::VersionMismatch { .. }
            | Error::Validation(_) => 1,
            Error::GenerationExhausted { .. }
            | Error::TrainingDiverged { .. }
            | Error::Consistency(_)
            | Error::Io { .. } => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
