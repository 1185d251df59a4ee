use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("malformed word list {path}: {message}")]
    WordList { path: PathBuf, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("no usable defining pairs")]
    NoUsablePairs,

    #[error("requested {requested} gender directions but only {available} are nonzero")]
    RankDeficient { requested: usize, available: usize },

    #[error("operation requires a one-dimensional gender subspace, got k={0}")]
    RequiresOneDirection(usize),

    #[error("word {0:?} is not in the vocabulary")]
    OutOfVocabulary(String),

    #[error("empty selection: no tokens left after filtering")]
    EmptySelection,

    #[error("training diverged at epoch {epoch} (loss is not finite); try a smaller learning rate")]
    Divergence { epoch: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Divergence { .. } => 4,
            _ => 3,
        }
    }

    /// Short machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::WordList { .. } => "word_list",
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::NoUsablePairs => "no_usable_pairs",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::RequiresOneDirection(_) => "requires_one_direction",
            Error::OutOfVocabulary(_) => "out_of_vocabulary",
            Error::EmptySelection => "empty_selection",
            Error::Divergence { .. } => "divergence",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
