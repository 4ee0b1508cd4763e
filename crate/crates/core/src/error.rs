use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frame out of window: frame {frame} not in [1, {window}]")]
    FrameOutOfWindow { frame: usize, window: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("duplicate radio sample at frame {frame} for basestation {basestation:?}")]
    DuplicateRadioSample { frame: usize, basestation: String },

    #[error("degenerate step: zero-length displacement")]
    DegenerateStep,

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("empty hypothesis: no non-empty detections")]
    EmptyHypothesis,

    #[error("unknown basestation {0:?}")]
    UnknownBasestation(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: estimate has {est} frames, truth has {truth}")]
    LengthMismatch { est: usize, truth: usize },

    #[error("invalid config `{key}`: {message}")]
    InvalidConfig { key: String, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
