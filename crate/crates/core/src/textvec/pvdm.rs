//! Paragraph Vector, distributed-memory variant, trained with negative
//! sampling.
//!
//! The network input at position `t` of document `i` is the concatenation
//! `[doc_i, w_{t-window}, .., w_{t-1}, w_{t+1}, .., w_{t+window}]`; context
//! slots that fall outside the document read a shared trainable pad vector.
//! The output layer has one row of width `dim * (2 * window + 1)` per word.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_vocabulary, TokenizedDoc, Vocabulary};
use crate::artifact::{Artifact, ArtifactHeader};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PvdmParams {
    pub dim: usize,
    /// Context half-width in tokens.
    pub window: usize,
    pub negative: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_lr: f64,
    pub min_df: usize,
    pub seed: u64,
    /// Lock-free multi-threaded updates. Not bitwise reproducible.
    pub parallel: bool,
}

impl Default for PvdmParams {
    fn default() -> Self {
        PvdmParams {
            dim: 50,
            window: 5,
            negative: 5,
            epochs: 40,
            initial_lr: 0.025,
            min_lr: 1e-4,
            min_df: 2,
            seed: 0,
            parallel: false,
        }
    }
}

impl PvdmParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidHyperparameters(msg.to_string()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.negative == 0 {
            return bad("negative must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.min_lr > 0.0 && self.initial_lr > self.min_lr && self.initial_lr.is_finite()) {
            return bad("learning rates must satisfy initial_lr > min_lr > 0");
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.dim * (2 * self.window + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvdmModel {
    pub vocabulary: Vocabulary,
    /// V x d.
    pub word_vectors: Matrix,
    /// n x d, row i belongs to the i-th training document.
    pub doc_vectors: Matrix,
    pub null_pad: Vec<f64>,
    /// V x d(2 window + 1).
    pub output_weights: Matrix,
    pub doc_ids: Vec<String>,
    pub params: PvdmParams,
    /// Mean negative-sampling loss per position, one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

impl PvdmModel {
    /// Vocabulary indices of the in-vocabulary tokens, in order.
    pub fn encode_tokens(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.vocabulary.index_of(t)).collect()
    }

    /// Network input at `position` of the encoded sequence of document
    /// `doc_index`, under the current parameters.
    pub fn context_input(&self, doc_index: usize, sequence: &[usize], position: usize) -> Vec<f64> {
        let d = self.params.dim;
        let mut h = Vec::with_capacity(self.params.input_width());
        h.extend_from_slice(self.doc_vectors.row(doc_index));
        for slot in context_slots(sequence, position, self.params.window) {
            match slot {
                Some(w) => h.extend_from_slice(self.word_vectors.row(w)),
                None => h.extend_from_slice(&self.null_pad),
            }
        }
        debug_assert_eq!(h.len(), d * (2 * self.params.window + 1));
        h
    }

    pub fn to_artifact(&self) -> Artifact {
        let d = self.params.dim;
        let mut header = ArtifactHeader::new("pvdm");
        header.dims.insert("vocab".into(), self.vocabulary.len());
        header.dims.insert("dim".into(), d);
        header.dims.insert("docs".into(), self.doc_ids.len());
        header.hyperparameters = serde_json::to_value(&self.params).expect("params serialize");
        header.seed = Some(self.params.seed);
        header.parallel = self.params.parallel;
        header.matrices = vec![
            "word_vectors".into(),
            "doc_vectors".into(),
            "null_pad".into(),
            "output_weights".into(),
        ];
        header.extra = serde_json::json!({
            "vocabulary": self.vocabulary,
            "doc_ids": self.doc_ids,
            "epoch_losses": self.epoch_losses,
        });
        Artifact {
            header,
            matrices: vec![
                self.word_vectors.clone(),
                self.doc_vectors.clone(),
                Matrix::from_vec(1, d, self.null_pad.clone()),
                self.output_weights.clone(),
            ],
        }
    }

    pub fn from_artifact(a: &Artifact) -> Result<Self> {
        a.expect_type("pvdm")?;
        let mut params: PvdmParams = serde_json::from_value(a.header.hyperparameters.clone())?;
        params.parallel = a.header.parallel;
        Ok(PvdmModel {
            vocabulary: serde_json::from_value(a.header.extra["vocabulary"].clone())?,
            word_vectors: a.matrix("word_vectors")?.clone(),
            doc_vectors: a.matrix("doc_vectors")?.clone(),
            null_pad: a.matrix("null_pad")?.as_slice().to_vec(),
            output_weights: a.matrix("output_weights")?.clone(),
            doc_ids: serde_json::from_value(a.header.extra["doc_ids"].clone())?,
            params,
            epoch_losses: serde_json::from_value(a.header.extra["epoch_losses"].clone())?,
        })
    }
}

pub fn pvdm_doc_vector<'a>(model: &'a PvdmModel, programme_id: &str) -> Result<&'a [f64]> {
    model
        .doc_ids
        .iter()
        .position(|d| d == programme_id)
        .map(|i| model.doc_vectors.row(i))
        .ok_or_else(|| Error::UnknownDocument(programme_id.to_string()))
}

/// Context word indices around `position`, left then right, `None` past the
/// document boundaries.
fn context_slots(sequence: &[usize], position: usize, window: usize) -> impl Iterator<Item = Option<usize>> + '_ {
    let left = (1..=window)
        .rev()
        .map(move |o| position.checked_sub(o).map(|p| sequence[p]));
    let right = (1..=window).map(move |o| sequence.get(position + o).copied());
    left.chain(right)
}

fn log_sigmoid(x: f64) -> f64 {
    // ln(1 / (1 + e^-x)) without overflow
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-Σ_j [label_j ln σ(o_j·h) + (1 - label_j) ln σ(-o_j·h)]`.
pub fn negative_sampling_loss(input: &[f64], outputs: &[&[f64]], labels: &[f64]) -> f64 {
    outputs
        .iter()
        .zip(labels)
        .map(|(o, &label)| {
            let score = crate::matrix::dot(o, input);
            -(label * log_sigmoid(score) + (1.0 - label) * log_sigmoid(-score))
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsGradients {
    pub loss: f64,
    pub input: Vec<f64>,
    /// One gradient per output row, same order as the inputs.
    pub outputs: Vec<Vec<f64>>,
}

/// Analytic gradients of [`negative_sampling_loss`] with respect to the
/// input vector and each output row.
pub fn negative_sampling_gradients(input: &[f64], outputs: &[&[f64]], labels: &[f64]) -> NsGradients {
    let mut grad_input = vec![0.0; input.len()];
    let mut grad_outputs = Vec::with_capacity(outputs.len());
    let mut loss = 0.0;
    for (o, &label) in outputs.iter().zip(labels) {
        let score = crate::matrix::dot(o, input);
        loss -= label * log_sigmoid(score) + (1.0 - label) * log_sigmoid(-score);
        let g = sigmoid(score) - label;
        for (gi, &oi) in grad_input.iter_mut().zip(o.iter()) {
            *gi += g * oi;
        }
        grad_outputs.push(input.iter().map(|&h| g * h).collect());
    }
    NsGradients {
        loss,
        input: grad_input,
        outputs: grad_outputs,
    }
}

/// Row-major matrix of `f64` stored as atomic bit patterns so that the
/// parallel trainer can share it without locks. Relaxed ordering only.
struct SharedMatrix {
    cols: usize,
    data: Vec<AtomicU64>,
}

impl SharedMatrix {
    fn from_matrix(m: Matrix) -> Self {
        let cols = m.cols();
        SharedMatrix {
            cols,
            data: m.into_vec().into_iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
        }
    }

    fn read_row_into(&self, r: usize, out: &mut Vec<f64>) {
        out.extend(
            self.data[r * self.cols..(r + 1) * self.cols]
                .iter()
                .map(|a| f64::from_bits(a.load(Ordering::Relaxed))),
        );
    }

    /// row += alpha * x
    fn axpy(&self, r: usize, alpha: f64, x: &[f64]) {
        for (a, &xi) in self.data[r * self.cols..(r + 1) * self.cols].iter().zip(x) {
            let cur = f64::from_bits(a.load(Ordering::Relaxed));
            a.store((cur + alpha * xi).to_bits(), Ordering::Relaxed);
        }
    }

    fn into_matrix(self, rows: usize) -> Matrix {
        Matrix::from_vec(
            rows,
            self.cols,
            self.data.into_iter().map(|a| f64::from_bits(a.into_inner())).collect(),
        )
    }
}

struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    /// Unigram distribution raised to the 0.75 power.
    fn new(vocab: &Vocabulary) -> Self {
        let mut acc = 0.0;
        let cumulative = (0..vocab.len())
            .map(|i| {
                acc += (vocab.corpus_frequency(i) as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseTable { cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let u = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

struct Trainer<'a> {
    params: &'a PvdmParams,
    sequences: &'a [Vec<usize>],
    noise: NoiseTable,
    words: SharedMatrix,
    docs: SharedMatrix,
    pad: SharedMatrix,
    out: SharedMatrix,
    total_steps: usize,
    step: AtomicUsize,
}

impl Trainer<'_> {
    fn learning_rate(&self, step: usize) -> f64 {
        let p = self.params;
        let frac = step as f64 / self.total_steps.max(1) as f64;
        p.initial_lr - (p.initial_lr - p.min_lr) * frac
    }

    /// One SGD pass over a document. Returns the summed loss.
    fn train_document(&self, doc: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
        let p = self.params;
        let d = p.dim;
        let seq = &self.sequences[doc];
        let mut input = Vec::with_capacity(p.input_width());
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(p.negative + 1);
        let mut targets: Vec<(usize, f64)> = Vec::with_capacity(p.negative + 1);
        let mut loss_sum = 0.0;

        for t in 0..seq.len() {
            let step = self.step.fetch_add(1, Ordering::Relaxed);
            let lr = self.learning_rate(step);

            input.clear();
            self.docs.read_row_into(doc, &mut input);
            let slots: Vec<Option<usize>> = context_slots(seq, t, p.window).collect();
            for slot in &slots {
                match slot {
                    Some(w) => self.words.read_row_into(*w, &mut input),
                    None => self.pad.read_row_into(0, &mut input),
                }
            }

            targets.clear();
            targets.push((seq[t], 1.0));
            for _ in 0..p.negative {
                let w = self.noise.sample(rng);
                if w != seq[t] {
                    targets.push((w, 0.0));
                }
            }
            rows.resize_with(targets.len(), Vec::new);
            for (row, (w, _)) in rows.iter_mut().zip(&targets) {
                row.clear();
                self.out.read_row_into(*w, row);
            }
            let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            let labels: Vec<f64> = targets.iter().map(|t| t.1).collect();
            let grads = negative_sampling_gradients(&input, &refs, &labels);
            if !grads.loss.is_finite() || !grads.input.iter().all(|g| g.is_finite()) {
                return Err(Error::InvalidHyperparameters(format!(
                    "training diverged at step {step} (non-finite loss or gradient)"
                )));
            }
            loss_sum += grads.loss;

            for ((w, _), g) in targets.iter().zip(&grads.outputs) {
                self.out.axpy(*w, -lr, g);
            }
            self.docs.axpy(doc, -lr, &grads.input[..d]);
            for (s, slot) in slots.iter().enumerate() {
                let g = &grads.input[(s + 1) * d..(s + 2) * d];
                match slot {
                    Some(w) => self.words.axpy(*w, -lr, g),
                    None => self.pad.axpy(0, -lr, g),
                }
            }
        }
        Ok(loss_sum)
    }
}

/// Trains PV-DM on `docs`. Tokens below `params.min_df` are dropped before
/// context windows are formed. Single-threaded runs are bitwise
/// reproducible for a given seed.
pub fn train_pvdm(docs: &[TokenizedDoc], params: &PvdmParams) -> Result<PvdmModel> {
    params.validate()?;
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocabulary = build_vocabulary(docs, params.min_df.max(1))?;
    let sequences: Vec<Vec<usize>> = docs
        .iter()
        .map(|doc| doc.tokens.iter().filter_map(|t| vocabulary.index_of(t)).collect())
        .collect();
    let positions: usize = sequences.iter().map(Vec::len).sum();

    let d = params.dim;
    let v = vocabulary.len();
    let n = docs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let bound = 0.5 / d as f64;
    let mut init = |rows: usize, cols: usize| Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound));
    let word_vectors = init(v, d);
    let doc_vectors = init(n, d);
    let null_pad = init(1, d);
    let output_weights = init(v, params.input_width());

    let trainer = Trainer {
        params,
        sequences: &sequences,
        noise: NoiseTable::new(&vocabulary),
        words: SharedMatrix::from_matrix(word_vectors),
        docs: SharedMatrix::from_matrix(doc_vectors),
        pad: SharedMatrix::from_matrix(null_pad),
        out: SharedMatrix::from_matrix(output_weights),
        total_steps: params.epochs * positions,
        step: AtomicUsize::new(0),
    };

    let mut epoch_losses = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        let loss = if params.parallel {
            (0..n)
                .into_par_iter()
                .map(|doc| {
                    let stream = (epoch * n + doc) as u64;
                    let mut local = ChaCha8Rng::seed_from_u64(params.seed);
                    local.set_stream(stream + 1);
                    trainer.train_document(doc, &mut local)
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .sum::<f64>()
        } else {
            let mut loss = 0.0;
            for doc in 0..n {
                loss += trainer.train_document(doc, &mut rng)?;
            }
            loss
        };
        epoch_losses.push(if positions > 0 { loss / positions as f64 } else { 0.0 });
    }

    let Trainer {
        words,
        docs: doc_store,
        pad,
        out,
        ..
    } = trainer;
    let model = PvdmModel {
        vocabulary,
        word_vectors: words.into_matrix(v),
        doc_vectors: doc_store.into_matrix(n),
        null_pad: pad.into_matrix(1).into_vec(),
        output_weights: out.into_matrix(v),
        doc_ids: docs.iter().map(|d| d.programme_id.clone()).collect(),
        params: params.clone(),
        epoch_losses,
    };
    if !(model.word_vectors.is_finite()
        && model.doc_vectors.is_finite()
        && model.output_weights.is_finite()
        && model.null_pad.iter().all(|v| v.is_finite()))
    {
        return Err(Error::InvalidHyperparameters(
            "training produced non-finite parameters".into(),
        ));
    }
    Ok(model)
}
