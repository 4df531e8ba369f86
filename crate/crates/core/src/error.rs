use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the library. Each variant names the module that produced it
/// so the CLI can categorize failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("corpus: {0}")]
    Corpus(String),

    #[error("embedding: {0}")]
    Embedding(String),

    #[error("embedding: token {0:?} is not in the vocabulary")]
    OutOfVocabulary(String),

    #[error("seeds: {0}")]
    Seeds(String),

    #[error("lexicon: {0}")]
    Lexicon(String),

    #[error("compositional: {0}")]
    Compositional(String),

    #[error("features: {0}")]
    Features(String),

    #[error("learn: {0}")]
    Learn(String),

    #[error("experiments: {0}")]
    Experiment(String),

    #[error("leakage: {0}")]
    Leakage(String),

    #[error("numeric: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Short module tag used for exit-code categorization.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Corpus(_) => "corpus",
            Error::Embedding(_) | Error::OutOfVocabulary(_) => "embedding",
            Error::Seeds(_) => "seed_selection",
            Error::Lexicon(_) => "lexicon_core",
            Error::Compositional(_) => "cs_lexicon",
            Error::Features(_) => "featurize",
            Error::Learn(_) => "learn",
            Error::Experiment(_) | Error::Leakage(_) => "experiments",
            Error::Numeric(_) => "numeric",
        }
    }
}
