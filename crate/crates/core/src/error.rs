use std::path::PathBuf;

use thiserror::Error;

use crate::types::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the CLI for exit codes and by the HTTP
/// service for status mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad input: malformed files, invalid configuration, contract violations.
    Validation,
    /// Filesystem or snapshot I/O.
    Io,
    /// An embedding or chat-completion endpoint failed.
    Endpoint,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed transcript line")]
    MalformedLine { line: usize },
    #[error("missing header field {0}")]
    MissingHeaderField(&'static str),
    #[error("transcript has no caption text after stripping")]
    EmptyTranscript,
    #[error("transcript is not valid UTF-8 (byte offset {offset})")]
    InvalidUtf8 { offset: usize },
    #[error("line {line}: invalid {field}: {message}")]
    InvalidHeaderValue {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("metadata failed validation: {}", format_violations(.0))]
    InvalidMetadata(Vec<Violation>),
    #[error("duplicate recording id {0}")]
    DuplicateRecording(String),

    #[error("invalid chunk policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed chunk id {0:?}")]
    InvalidChunkId(String),

    #[error("input text is empty")]
    EmptyInput,
    #[error("text of {len} chars exceeds the {max} char limit")]
    TextTooLong { len: usize, max: usize },
    #[error("batch of {len} texts exceeds the limit of {max}")]
    BatchTooLarge { len: usize, max: usize },
    #[error("endpoint unavailable (status {status:?}, retriable: {retriable}): {message}")]
    EndpointUnavailable {
        status: Option<u16>,
        retriable: bool,
        message: String,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector is all-zero or has a non-finite norm")]
    ZeroVector,
    #[error("vector contains non-finite values")]
    NonFiniteVector,

    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("snapshot format version {0} is not supported")]
    VersionUnsupported(u32),
    #[error("index is empty")]
    IndexEmpty,
    #[error("chunk {0} is not in the index")]
    UnknownChunk(String),
    #[error("invalid search filter: {0}")]
    InvalidFilter(String),
    #[error("{0} transcript file(s) rejected")]
    FilesRejected(usize),

    #[error("no well-formed Q/A blocks in model response")]
    NoPairsFound,
    #[error("target of {0} pairs exceeds the per-document limit of 50")]
    TooManyPairs(usize),

    #[error("question is empty")]
    EmptyQuestion,
    #[error("{0} contexts given; at most 4 are allowed")]
    TooManyContexts(usize),

    #[error("text is empty")]
    EmptyText,
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("answer is empty")]
    EmptyAnswer,
    #[error("evaluation set is empty")]
    EmptyEvalSet,

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.code.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Stable machine-readable code, e.g. `MALFORMED_LINE`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MalformedLine { .. } => "MALFORMED_LINE",
            Error::MissingHeaderField(_) => "MISSING_HEADER_FIELD",
            Error::EmptyTranscript => "EMPTY_TRANSCRIPT",
            Error::InvalidUtf8 { .. } => "INVALID_UTF8",
            Error::InvalidHeaderValue { .. } => "INVALID_HEADER_VALUE",
            Error::InvalidMetadata(_) => "INVALID_METADATA",
            Error::DuplicateRecording(_) => "DUPLICATE_RECORDING",
            Error::InvalidPolicy(_) => "INVALID_POLICY",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
            Error::InvalidChunkId(_) => "INVALID_CHUNK_ID",
            Error::EmptyInput => "EMPTY_INPUT",
            Error::TextTooLong { .. } => "TEXT_TOO_LONG",
            Error::BatchTooLarge { .. } => "BATCH_TOO_LARGE",
            Error::EndpointUnavailable { .. } => "ENDPOINT_UNAVAILABLE",
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::ZeroVector => "ZERO_VECTOR",
            Error::NonFiniteVector => "NON_FINITE_VECTOR",
            Error::CorruptSnapshot(_) => "CORRUPT_SNAPSHOT",
            Error::VersionUnsupported(_) => "VERSION_UNSUPPORTED",
            Error::IndexEmpty => "INDEX_EMPTY",
            Error::UnknownChunk(_) => "UNKNOWN_CHUNK",
            Error::InvalidFilter(_) => "INVALID_FILTER",
            Error::FilesRejected(_) => "FILES_REJECTED",
            Error::NoPairsFound => "NO_PAIRS_FOUND",
            Error::TooManyPairs(_) => "TOO_MANY_PAIRS",
            Error::EmptyQuestion => "EMPTY_QUESTION",
            Error::TooManyContexts(_) => "TOO_MANY_CONTEXTS",
            Error::EmptyText => "EMPTY_TEXT",
            Error::EmptyGroundTruth => "EMPTY_GROUND_TRUTH",
            Error::EmptyAnswer => "EMPTY_ANSWER",
            Error::EmptyEvalSet => "EMPTY_EVAL_SET",
            Error::Io { .. } => "IO",
            Error::Json { .. } => "JSON",
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::EndpointUnavailable { .. } => ErrorCategory::Endpoint,
            Error::Io { .. } | Error::CorruptSnapshot(_) | Error::VersionUnsupported(_) => {
                ErrorCategory::Io
            }
            _ => ErrorCategory::Validation,
        }
    }

    pub fn is_retriable(&self) -> bool {
        matches!(self, Error::EndpointUnavailable { retriable: true, .. })
    }
}
