use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed wav data: {0}")]
    MalformedWav(String),

    #[error("unsupported wav encoding: {0}")]
    UnsupportedWav(String),

    #[error("invalid audio buffer: {0}")]
    InvalidBuffer(String),

    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    RateMismatch { left: u32, right: u32 },

    #[error("{name} = {value} is outside the allowed range [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bank error: {0}")]
    Bank(String),

    #[error("checksum mismatch for entry {speaker}/{word} ({path})")]
    ChecksumMismatch {
        speaker: String,
        word: String,
        path: String,
    },

    #[error("unknown speaker: {0}")]
    UnknownSpeaker(String),

    #[error("filler word {0:?} is not in the vocabulary")]
    FillerNotInVocab(String),

    #[error("no stitchable tokens")]
    NoStitchableTokens,

    #[error("tts adapter failed for word {word:?} voice {voice:?}: {message}")]
    Tts {
        word: String,
        voice: String,
        message: String,
    },

    #[error("dictionary error: {0}")]
    Dictionary(String),

    #[error("malformed input at line {line}: {message}")]
    MalformedRow { line: usize, message: String },

    #[error("pair {id}: {source}")]
    Pair {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn for_pair(id: &str, source: Error) -> Self {
        Error::Pair {
            id: id.to_string(),
            source: Box::new(source),
        }
    }
}
