use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("unknown tokenizer scheme `{0}` (expected `lexical` or `bpe`)")]
    UnknownTokenizer(String),

    #[error("invalid BPE merges file {path}: {reason}")]
    InvalidMerges { path: PathBuf, reason: String },

    #[error("placeholder `{0}` does not appear in the anonymization map")]
    UnknownPlaceholder(String),

    #[error("source text is empty")]
    EmptySource,

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
