use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("malformed manifest ({context}): {message}")]
    MalformedManifest { context: String, message: String },

    #[error("duplicate programme id {0:?}")]
    DuplicateId(String),

    #[error("{} is not valid UTF-8", .0.display())]
    InvalidEncoding(PathBuf),

    #[error("malformed SRT at line {line}: {message}")]
    MalformedSrt { line: usize, message: String },

    #[error("unsupported WAV format: {0}")]
    UnsupportedWavFormat(String),

    #[error("audio file {} contains no samples", .0.display())]
    EmptyAudio(PathBuf),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("no token reaches the minimum document frequency of {min_df}")]
    EmptyVocabulary { min_df: usize },

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),

    #[error("unknown document {0:?}")]
    UnknownDocument(String),

    #[error("need at least 2 frames to fit normalization, got {0}")]
    InsufficientFrames(usize),

    #[error("codebook of size {k} needs at least {k} frames, got {frames}")]
    TooFewFrames { k: usize, frames: usize },

    #[error("empty genre path")]
    EmptyPath,

    #[error("genre path {0:?} has an empty segment")]
    EmptySegment(String),

    #[error("no genre metadata in corpus")]
    NoMetadata,

    #[error("genre node {0:?} is not part of the attribute space")]
    UnknownNode(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("programme {programme:?} is missing from modality {modality}")]
    MissingModality { modality: String, programme: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("no fusion weight for modality {0}")]
    UnknownModalityWeight(String),

    #[error("all fusion weights are zero")]
    AllZeroWeights,

    #[error("invalid fusion weight for {modality}: {weight}")]
    InvalidWeight { modality: String, weight: f64 },

    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("relevance size m={m} must lie in 1..={max}")]
    InvalidM { m: usize, max: usize },

    #[error("no query has a non-empty relevant set")]
    NoEvaluableQueries,

    #[error("no models to evaluate")]
    NoModels,

    #[error("weight grid for {0} is empty")]
    EmptyGrid(String),

    #[error("relevance refers to unknown programme {0:?}")]
    UnknownProgramme(String),

    #[error("artifact format error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn manifest(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::MalformedManifest {
            context: context.into(),
            message: message.into(),
        }
    }
}

/// Opens a file, mapping "not found" onto [`Error::MissingFile`].
pub(crate) fn read_file(path: &std::path::Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}
