//! Glue from manifest entries to per-modality vectors.

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audiovec::{
    encode_boaw, extract_features, fit_codebook, fit_normalization, pooled_features, Codebook, CodebookParams,
    FrameFeatureMatrix, NormalizationStats,
};
use crate::corpus::{load_audio, load_subtitles, ManifestEntry, SubtitleOptions};
use crate::error::{Error, Result};
use crate::fusion::{Modality, ModalityVectors};
use crate::matrix::Matrix;
use crate::metavec::{build_attribute_space, encode_metadata, AttributeSpace, GenrePath};
use crate::textvec::{
    build_vocabulary, fit_lsi, to_bow, train_pvdm, LsiModel, LsiParams, PvdmModel, PvdmParams, TokenizedDoc,
};

/// Everything later stages need from one programme.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestedProgramme {
    pub id: String,
    pub doc: TokenizedDoc,
    pub features: FrameFeatureMatrix,
    pub genres: Vec<GenrePath>,
}

/// Reads subtitles, audio and genres of one manifest entry.
pub fn ingest_programme(entry: &ManifestEntry, subtitles: SubtitleOptions) -> Result<IngestedProgramme> {
    let text = load_subtitles(&entry.subtitle_path, subtitles)?;
    let signal = load_audio(&entry.audio_path, &entry.id)?;
    let features = extract_features(&signal);
    Ok(IngestedProgramme {
        id: entry.id.clone(),
        doc: TokenizedDoc::new(entry.id.clone(), &text),
        features,
        genres: entry.genre_paths()?,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AudioParams {
    pub codebook: CodebookParams,
    /// Drop frames whose RMS is below this before fitting and encoding.
    pub trim_silence: Option<f64>,
    /// Use mean+std pooled frame features instead of the BoAW histogram.
    pub pooled: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LsiSettings {
    #[serde(flatten)]
    pub params: LsiParams,
    pub min_df: Option<usize>,
}

impl LsiSettings {
    pub fn min_df(&self) -> usize {
        self.min_df.unwrap_or(1)
    }
}

pub fn lsi_vectors(docs: &[TokenizedDoc], settings: &LsiSettings) -> Result<(LsiModel, ModalityVectors)> {
    let vocab = build_vocabulary(docs, settings.min_df())?;
    let bows: Vec<_> = docs.iter().map(|d| to_bow(d, &vocab)).collect();
    let model = fit_lsi(&bows, &vocab, &settings.params)?;
    info!("LSI: {} terms, k = {}", vocab.len(), model.k());
    let vectors = model.doc_topic.row_iter().map(<[f64]>::to_vec).collect();
    Ok((model, modality_vectors(Modality::Lsi, docs, vectors)))
}

pub fn d2v_vectors(docs: &[TokenizedDoc], params: &PvdmParams) -> Result<(PvdmModel, ModalityVectors)> {
    let model = train_pvdm(docs, params)?;
    if let (Some(first), Some(last)) = (model.epoch_losses.first(), model.epoch_losses.last()) {
        info!(
            "PV-DM: loss {first:.4} -> {last:.4} over {} epochs",
            model.epoch_losses.len()
        );
    }
    let vectors = model.doc_vectors.row_iter().map(<[f64]>::to_vec).collect();
    Ok((model, modality_vectors(Modality::D2v, docs, vectors)))
}

fn modality_vectors(m: Modality, docs: &[TokenizedDoc], vectors: Vec<Vec<f64>>) -> ModalityVectors {
    ModalityVectors {
        label: m.label().into(),
        ids: docs.iter().map(|d| d.programme_id.clone()).collect(),
        vectors,
    }
}

/// Stacks every programme's frames into one matrix.
pub fn stack_frames(features: &[FrameFeatureMatrix]) -> Matrix {
    let cols = features.first().map_or(0, |f| f.rows.cols());
    let rows: usize = features.iter().map(FrameFeatureMatrix::frames).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for f in features {
        data.extend_from_slice(f.rows.as_slice());
    }
    Matrix::from_vec(rows, cols, data)
}

/// Fits normalization and the codebook on all frames, then encodes each
/// programme. With `pooled` set, the codebook is still fitted but the
/// vectors are pooled frame statistics.
pub fn audio_vectors(features: &[FrameFeatureMatrix], params: &AudioParams) -> Result<(Codebook, ModalityVectors)> {
    if features.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let trimmed: Vec<FrameFeatureMatrix>;
    let features = match params.trim_silence {
        Some(t) => {
            trimmed = features.iter().map(|f| f.trim_silence(t)).collect();
            &trimmed[..]
        }
        None => features,
    };
    let all = stack_frames(features);
    let stats: NormalizationStats = fit_normalization(&all)?;
    let normalized = stats.apply_matrix(&all);
    let codebook = fit_codebook(&normalized, stats, &params.codebook)?;
    info!("codebook: K = {} over {} frames", codebook.k(), all.rows());
    let vectors = if params.pooled {
        features.iter().map(|f| pooled_features(f, &codebook.stats)).collect()
    } else {
        features
            .par_iter()
            .map(|f| encode_boaw(f, &codebook).map(|b| b.histogram))
            .collect::<Result<_>>()?
    };
    Ok((
        codebook,
        ModalityVectors {
            label: Modality::Aud.label().into(),
            ids: features.iter().map(|f| f.programme_id.clone()).collect(),
            vectors,
        },
    ))
}

pub fn metadata_vectors(
    ids: &[String],
    genres: &[Vec<GenrePath>],
    level_weights: &[f64],
) -> Result<(AttributeSpace, ModalityVectors)> {
    let space = build_attribute_space(genres.iter().flatten())?;
    let vectors = ids
        .iter()
        .zip(genres)
        .map(|(id, paths)| encode_metadata(id, paths, &space, level_weights).map(|c| c.values))
        .collect::<Result<_>>()?;
    Ok((
        space,
        ModalityVectors {
            label: Modality::Md.label().into(),
            ids: ids.to_vec(),
            vectors,
        },
    ))
}
