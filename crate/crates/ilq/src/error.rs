use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: &'static str, found: Vec<u8> },

    #[error("unsupported format version {found} (this build reads {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("file truncated inside section `{section}`")]
    Truncated { section: &'static str },

    #[error("{count} unexpected trailing bytes after the payload")]
    TrailingBytes { count: usize },

    #[error("malformed header: {0}")]
    Header(String),

    #[error("invalid payload: {0}")]
    Payload(String),

    #[error("line {line}: {message}")]
    Jsonl { line: usize, message: String },

    #[error("dataset dimensions are undefined (empty import)")]
    UndefinedDims,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(#[from] ilq_core::Error),
}

impl IoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io { path: path.into(), source }
    }

    /// Stable short tag used in one-line CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            IoError::Io { .. } => "io",
            IoError::BadMagic { .. } => "bad-magic",
            IoError::UnsupportedVersion { .. } => "unsupported-version",
            IoError::Truncated { .. } => "truncated",
            IoError::TrailingBytes { .. } => "trailing-bytes",
            IoError::Header(_) => "header",
            IoError::Payload(_) => "payload",
            IoError::Jsonl { .. } => "jsonl",
            IoError::UndefinedDims => "undefined-dims",
            IoError::Config(_) => "config",
            IoError::Csv(_) => "csv",
            IoError::Core(ilq_core::Error::InvalidConfig(_) | ilq_core::Error::OutOfRange { .. }) => "config",
            IoError::Core(ilq_core::Error::TrainingAborted { .. }) => "training-aborted",
            IoError::Core(_) => "core",
        }
    }
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;
