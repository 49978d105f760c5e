use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scene document is malformed: {0}")]
    SceneSchema(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("grid of {cells} cells exceeds the cap of {cap} cells")]
    GridTooLarge { cells: usize, cap: usize },

    #[error("{what} maps to a non-air grid cell")]
    NotInAir { what: &'static str },

    #[error("simulation became unstable at step {step}: {detail}")]
    Unstable { step: usize, detail: String },

    #[error("insufficient decay")]
    InsufficientDecay,

    #[error("no detectable direct arrival")]
    NoDirectArrival,

    #[error("signal is silent")]
    Silent,

    #[error("signal too short: {0}")]
    TooShort(String),

    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),

    #[error("zero variance input")]
    ZeroVariance,

    #[error("singular system: {0}")]
    Singular(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sampling pool does not overlap the target T60 support")]
    DisjointSupport,

    #[error("wav error in {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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
}
