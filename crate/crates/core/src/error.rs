use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke a shape or count contract.
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate pose: {0}")]
    DegeneratePose(String),
    #[error("missing markers for {0}")]
    MissingMarkers(String),
    #[error("input too short: need at least {needed} samples, got {got}")]
    InputTooShort { needed: usize, got: usize },
    #[error("stream alignment: {0}")]
    Alignment(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("degenerate test: {0}")]
    DegenerateTest(String),
    #[error("config: {0}")]
    Config(String),
    #[error("corrupt container: {0}")]
    Corrupt(String),
    #[error("channel count mismatch: expected {expected}, found {found}")]
    ChannelCount { expected: usize, found: usize },
    #[error("duration mismatch: EMG covers {emg_s:.4} s, markers cover {markers_s:.4} s")]
    DurationMismatch { emg_s: f64, markers_s: f64 },
    #[error("unsupported container version {found} (this build reads up to {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// An error raised while handling one named trial or artifact.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File { path: path.into(), source }
    }

    /// Prefixes the error with the trial or artifact it concerns.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// The innermost error, with any context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code class: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 2,
            Error::Context { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
