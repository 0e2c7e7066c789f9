//! Content-based multimodal similarity for programme catalogues: subtitle
//! topic and paragraph vectors, bag-of-audio-words, genre categoricals,
//! middle and late fusion, and ranking evaluation.

pub mod artifact;
pub mod audiovec;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod matrix;
pub mod metavec;
pub mod pipeline;
pub mod textvec;

pub use error::{Error, Result};
pub use eval::{EvalReport, RelevanceSets};
pub use fusion::{FusionWeights, Modality, ModalityVectors, SimilarityMatrix};
pub use matrix::Matrix;
