use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the veriforecast pipeline.
///
/// Variants are grouped by failure class so callers (notably the CLI) can
/// map them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid contest `{id}`: {reason}")]
    InvalidContest { id: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tweet `{0}` has no TARGET span")]
    NoTarget(String),

    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("corrupt or malformed file `{path}`: {reason}")]
    CorruptFile { path: PathBuf, reason: String },

    #[error("schema violation in `{path}` line {line}: {reason}")]
    Schema {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("missing input: {0}")]
    MissingInput(PathBuf),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("non-finite loss during training (iteration {0}); check features and labels")]
    NonFiniteLoss(usize),

    #[error("no test examples for category `{0}`")]
    NoTestExamples(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
