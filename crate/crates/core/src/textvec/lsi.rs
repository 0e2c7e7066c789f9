use log::warn;
use serde::{Deserialize, Serialize};

use super::svd::{truncated_svd, SvdOptions};
use super::{BowVector, Vocabulary};
use crate::artifact::{Artifact, ArtifactHeader};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_LSI_DIM: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermWeighting {
    #[default]
    Counts,
    /// Count times smoothed idf, `ln((1 + n) / (1 + df)) + 1`.
    TfIdf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LsiParams {
    pub k: usize,
    pub weighting: TermWeighting,
    pub svd: SvdOptions,
}

impl Default for LsiParams {
    fn default() -> Self {
        LsiParams {
            k: DEFAULT_LSI_DIM,
            weighting: TermWeighting::Counts,
            svd: SvdOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsiModel {
    /// V x k, orthonormal columns.
    pub term_topic: Matrix,
    /// k values, non-increasing.
    pub singular_values: Vec<f64>,
    pub vocabulary: Vocabulary,
    pub params: LsiParams,
    /// Per-term weight applied before projection (all ones for raw counts).
    pub term_weights: Vec<f64>,
    pub doc_ids: Vec<String>,
    /// n x k latent coordinates of the training documents.
    pub doc_topic: Matrix,
}

impl LsiModel {
    pub fn k(&self) -> usize {
        self.singular_values.len()
    }

    pub fn doc_vector(&self, programme_id: &str) -> Result<&[f64]> {
        self.doc_ids
            .iter()
            .position(|d| d == programme_id)
            .map(|i| self.doc_topic.row(i))
            .ok_or_else(|| Error::UnknownDocument(programme_id.to_string()))
    }

    pub fn to_artifact(&self) -> Artifact {
        let mut header = ArtifactHeader::new("lsi");
        header.dims.insert("vocab".into(), self.vocabulary.len());
        header.dims.insert("k".into(), self.k());
        header.dims.insert("docs".into(), self.doc_ids.len());
        header.hyperparameters = serde_json::to_value(&self.params).expect("params serialize");
        header.seed = Some(self.params.svd.seed);
        header.matrices = vec![
            "term_topic".into(),
            "singular_values".into(),
            "doc_topic".into(),
            "term_weights".into(),
        ];
        header.extra = serde_json::json!({
            "vocabulary": self.vocabulary,
            "doc_ids": self.doc_ids,
        });
        Artifact {
            header,
            matrices: vec![
                self.term_topic.clone(),
                Matrix::from_vec(1, self.k(), self.singular_values.clone()),
                self.doc_topic.clone(),
                Matrix::from_vec(1, self.term_weights.len(), self.term_weights.clone()),
            ],
        }
    }

    pub fn from_artifact(a: &Artifact) -> Result<Self> {
        a.expect_type("lsi")?;
        let params: LsiParams = serde_json::from_value(a.header.hyperparameters.clone())?;
        let vocabulary: Vocabulary = serde_json::from_value(a.header.extra["vocabulary"].clone())?;
        let doc_ids: Vec<String> = serde_json::from_value(a.header.extra["doc_ids"].clone())?;
        Ok(LsiModel {
            term_topic: a.matrix("term_topic")?.clone(),
            singular_values: a.matrix("singular_values")?.as_slice().to_vec(),
            vocabulary,
            params,
            term_weights: a.matrix("term_weights")?.as_slice().to_vec(),
            doc_ids,
            doc_topic: a.matrix("doc_topic")?.clone(),
        })
    }
}

/// Rank-k truncated SVD of the V x n term-document matrix. `k` is clamped to
/// the numerical rank (with a warning).
pub fn fit_lsi(bows: &[BowVector], vocabulary: &Vocabulary, params: &LsiParams) -> Result<LsiModel> {
    if bows.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let v = vocabulary.len();
    let n = bows.len();
    let term_weights: Vec<f64> = match params.weighting {
        TermWeighting::Counts => vec![1.0; v],
        TermWeighting::TfIdf => (0..v)
            .map(|t| ((1.0 + n as f64) / (1.0 + vocabulary.document_frequency(t) as f64)).ln() + 1.0)
            .collect(),
    };
    let mut x = Matrix::zeros(v, n);
    for (d, bow) in bows.iter().enumerate() {
        for (&t, &c) in &bow.counts {
            if t >= v {
                return Err(Error::DimensionMismatch {
                    expected: v,
                    actual: t + 1,
                });
            }
            x[(t, d)] = c as f64 * term_weights[t];
        }
    }

    let svd = truncated_svd(&x, params.k, &params.svd);
    let rank = svd.rank();
    let k = params.k.min(rank);
    if k < params.k {
        warn!("LSI dimension {} exceeds corpus rank {rank}; using k = {k}", params.k);
    }
    let term_topic = svd.u.truncate_cols(k);
    let singular_values = svd.singular_values[..k].to_vec();
    // latent coordinates Uᵀx of each training document
    let doc_topic = x.t_matmul(&term_topic);

    Ok(LsiModel {
        term_topic,
        singular_values,
        vocabulary: vocabulary.clone(),
        params: params.clone(),
        term_weights,
        doc_ids: bows.iter().map(|b| b.programme_id.clone()).collect(),
        doc_topic,
    })
}

/// Latent coordinates `U_kᵀ x` (singular values are not re-applied).
pub fn project_lsi(model: &LsiModel, bow: &BowVector) -> Result<Vec<f64>> {
    let k = model.k();
    let mut out = vec![0.0; k];
    for (&t, &c) in &bow.counts {
        if t >= model.term_topic.rows() {
            return Err(Error::DimensionMismatch {
                expected: model.term_topic.rows(),
                actual: t + 1,
            });
        }
        let w = c as f64 * model.term_weights[t];
        for (o, u) in out.iter_mut().zip(model.term_topic.row(t)) {
            *o += w * u;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::cosine;
    use crate::textvec::{build_vocabulary, to_bow, TokenizedDoc};
    use std::collections::BTreeMap;

    fn doc(id: &str, toks: &[&str]) -> TokenizedDoc {
        TokenizedDoc {
            programme_id: id.into(),
            tokens: toks.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn fit(docs: &[TokenizedDoc], k: usize) -> (LsiModel, Vec<BowVector>) {
        let vocab = build_vocabulary(docs, 1).unwrap();
        let bows: Vec<_> = docs.iter().map(|d| to_bow(d, &vocab)).collect();
        let model = fit_lsi(
            &bows,
            &vocab,
            &LsiParams {
                k,
                ..Default::default()
            },
        )
        .unwrap();
        (model, bows)
    }

    #[test]
    fn identical_documents_coincide() {
        let docs = [doc("a", &["x", "y", "y"]), doc("b", &["x", "y", "y"])];
        let (model, bows) = fit(&docs, 1);
        let pa = project_lsi(&model, &bows[0]).unwrap();
        let pb = project_lsi(&model, &bows[1]).unwrap();
        assert_eq!(pa, pb);
        assert!((cosine(&pa, &pb).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn one_by_one_matrix() {
        let (model, _) = fit(&[doc("a", &["t", "t"])], 1);
        assert_eq!(model.singular_values, vec![2.0]);
        assert_eq!(model.term_topic.as_slice()[0].abs(), 1.0);
    }

    #[test]
    fn disjoint_documents_are_orthogonal() {
        let docs = [doc("a", &["x", "y", "x"]), doc("b", &["p", "q"])];
        let (model, bows) = fit(&docs, 2);
        let pa = project_lsi(&model, &bows[0]).unwrap();
        let pb = project_lsi(&model, &bows[1]).unwrap();
        assert!(cosine(&pa, &pb).unwrap().abs() < 1e-12);
    }

    #[test]
    fn zero_bow_projects_to_zero_and_training_docs_reproduce() {
        let docs = [doc("a", &["x", "y", "x"]), doc("b", &["y", "z"]), doc("c", &["z", "x"])];
        let (model, bows) = fit(&docs, 2);
        let zero = BowVector {
            programme_id: "z".into(),
            counts: BTreeMap::new(),
        };
        assert_eq!(project_lsi(&model, &zero).unwrap(), vec![0.0, 0.0]);
        for (i, b) in bows.iter().enumerate() {
            assert_eq!(project_lsi(&model, b).unwrap(), model.doc_topic.row(i));
        }
    }

    #[test]
    fn k_clamped_to_rank() {
        let docs = [doc("a", &["x", "y"]), doc("b", &["x", "y"]), doc("c", &["x", "y"])];
        let (model, _) = fit(&docs, 50);
        assert_eq!(model.k(), 1);
    }

    #[test]
    fn artifact_round_trip() {
        let docs = [doc("a", &["x", "y", "x"]), doc("b", &["y", "z"])];
        let (model, _) = fit(&docs, 2);
        let mut buf = Vec::new();
        model.to_artifact().write_to(&mut buf).unwrap();
        let back = LsiModel::from_artifact(&Artifact::read_from(buf.as_slice()).unwrap()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn tfidf_downweights_ubiquitous_terms() {
        let docs = [doc("a", &["common", "rare"]), doc("b", &["common", "other"])];
        let vocab = build_vocabulary(&docs, 1).unwrap();
        let bows: Vec<_> = docs.iter().map(|d| to_bow(d, &vocab)).collect();
        let params = LsiParams {
            k: 2,
            weighting: TermWeighting::TfIdf,
            ..Default::default()
        };
        let model = fit_lsi(&bows, &vocab, &params).unwrap();
        let common = vocab.index_of("common").unwrap();
        let rare = vocab.index_of("rare").unwrap();
        assert!(model.term_weights[common] < model.term_weights[rare]);
    }

    #[test]
    fn empty_corpus() {
        let vocab = build_vocabulary(&[doc("a", &["x"])], 1).unwrap();
        assert!(matches!(
            fit_lsi(&[], &vocab, &LsiParams::default()),
            Err(Error::EmptyCorpus)
        ));
    }
}
