use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("missing column `{column}` in persona source")]
    MissingColumn { column: String },

    #[error("row {row}: {message}")]
    InvalidRow { row: usize, message: String },

    #[error("duplicate elicited question `{0}`")]
    DuplicateQuestion(String),

    #[error("iteration {given} must be greater than last recorded iteration {last}")]
    IterationOrder { given: u32, last: u32 },

    #[error("invalid SCM: {}", .0.join("; "))]
    InvalidScm(Vec<String>),

    #[error("degenerate evidence: {0}")]
    DegenerateEvidence(String),

    #[error("unknown variable or state: {0}")]
    UnknownVariable(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("backend failure after {attempts} attempt(s): {message}")]
    Backend {
        attempts: u32,
        message: String,
        log: Vec<String>,
    },

    #[error("replay miss for key {0}")]
    ReplayMiss(String),

    #[error("replay conflict for key {0}: stored value differs")]
    ReplayConflict(String),

    #[error("no records for persona `{persona}`, arm {arm}, question `{question}`")]
    EmptyCell {
        persona: String,
        arm: u8,
        question: String,
    },

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: line {line}: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidScm(_) | Error::Schema(_) | Error::Io { .. } => 2,
            Error::Backend { .. } | Error::ReplayMiss(_) | Error::ReplayConflict(_) => 3,
            _ => 4,
        }
    }

    /// Short machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::MissingColumn { .. } => "missing_column",
            Error::InvalidRow { .. } => "invalid_row",
            Error::DuplicateQuestion(_) => "duplicate_question",
            Error::IterationOrder { .. } => "iteration_order",
            Error::InvalidScm(_) => "invalid_scm",
            Error::DegenerateEvidence(_) => "degenerate_evidence",
            Error::UnknownVariable(_) => "unknown_variable",
            Error::Config(_) => "config",
            Error::Backend { .. } => "backend",
            Error::ReplayMiss(_) => "replay_miss",
            Error::ReplayConflict(_) => "replay_conflict",
            Error::EmptyCell { .. } => "empty_cell",
            Error::SupportMismatch(_) => "support_mismatch",
            Error::Data(_) => "data",
            Error::MalformedLine { .. } => "malformed_line",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
