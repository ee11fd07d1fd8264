use std::path::PathBuf;
use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Error, Debug)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty corpus: no bytes found in any input file")]
    EmptyCorpus,

    #[error("manifest {path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dangling file reference in manifest: {0}")]
    DanglingFile(PathBuf),

    #[error("label out of range: {file} has {line_count} lines, label names line {line_number}")]
    LabelOutOfRange {
        file: PathBuf,
        line_number: usize,
        line_count: usize,
    },

    #[error("duplicate label for {file} line {line_number}")]
    DuplicateLabel { file: PathBuf, line_number: usize },

    #[error("labeled line {file}:{line_number} does not reference a local-training file")]
    LabelOutsideLocalSet { file: PathBuf, line_number: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },

    #[error("non-finite value in {context}")]
    Numeric { context: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("vocabulary mismatch: models were trained on different vocabularies")]
    VocabMismatch,

    #[error("degenerate labels: need at least one buggy and one clean line")]
    DegenerateLabels,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("bad file format in {path}: {message}")]
    BadFormat { path: PathBuf, message: String },

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
