use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("count of item {item} would become negative (strict turnstile violated)")]
    NegativeCount { item: u64 },
    #[error("item {item} outside domain [1..{n}]")]
    DomainViolation { item: u64, n: u64 },
    #[error("stream has zero total count")]
    EmptyStream,
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("empty point set")]
    EmptyPointSet,
    #[error("negative delta on an insertion-only sketch")]
    NegativeDeltaUnsupported,
    #[error("stream source cannot be replayed")]
    NonReplayableSource,
    #[error("invalid hierarchical heavy hitter set: {0}")]
    InvalidHhhSet(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("domain mismatch: stream has n={stream}, histogram has n={histogram}")]
    DomainMismatch { stream: u64, histogram: u64 },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn bad_params(msg: impl Into<String>) -> Error {
    Error::BadParams(msg.into())
}
