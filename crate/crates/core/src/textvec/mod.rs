//! Subtitle representations: LSI topic vectors and PV-DM document
//! embeddings.

mod lsi;
mod pvdm;
pub mod svd;
mod tokenize;
mod vocab;

pub use lsi::{fit_lsi, project_lsi, LsiModel, LsiParams, TermWeighting, DEFAULT_LSI_DIM};
pub use pvdm::{
    negative_sampling_gradients, negative_sampling_loss, pvdm_doc_vector, train_pvdm, NsGradients, PvdmModel,
    PvdmParams,
};
pub use tokenize::{tokenize, TokenizedDoc};
pub use vocab::{build_vocabulary, build_vocabulary_excluding, to_bow, BowVector, Vocabulary};
