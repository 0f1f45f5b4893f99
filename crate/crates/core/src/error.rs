use thiserror::Error;

/// Errors produced by the corpus, counting, noising, smoothing and verification layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("count table is empty")]
    EmptyTable,

    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),

    #[error("invalid noising configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: inputs have {inputs} positions, targets have {targets}")]
    LengthMismatch { inputs: usize, targets: usize },

    #[error("held-out sequence has {0} tokens, need at least 2")]
    HeldoutTooShort(usize),

    #[error("trigram context ({0}, {1}) was never observed")]
    UnseenContext(String, String),

    #[error("context length {len} exceeds the enumeration cap of {cap}")]
    ContextTooLong { len: usize, cap: usize },

    #[error("operation requires {expected} counts, table was built in {found} mode")]
    WrongMode { expected: &'static str, found: &'static str },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
