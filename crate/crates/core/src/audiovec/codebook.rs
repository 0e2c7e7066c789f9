//! Bag-of-audio-words codebook learned with mini-batch k-means.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{FrameFeatureMatrix, NormalizationStats};
use crate::artifact::{Artifact, ArtifactHeader};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Batches at least this large are assigned in parallel.
const PARALLEL_ASSIGN_MIN: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodebookParams {
    pub k: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for CodebookParams {
    fn default() -> Self {
        CodebookParams {
            k: 50,
            batch_size: 1024,
            iterations: 300,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    /// K x features, in normalized feature space.
    pub centroids: Matrix,
    pub stats: NormalizationStats,
    pub params: CodebookParams,
    /// Sum of squared distances of each batch to its nearest centroid at
    /// assignment time; in full-batch mode this is the k-means objective.
    pub objective_trace: Vec<f64>,
}

impl Codebook {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn to_artifact(&self) -> Artifact {
        let mut header = ArtifactHeader::new("codebook");
        header.dims.insert("k".into(), self.k());
        header.dims.insert("features".into(), self.centroids.cols());
        header.hyperparameters = serde_json::to_value(&self.params).expect("params serialize");
        header.seed = Some(self.params.seed);
        header.matrices = vec!["centroids".into(), "mean".into(), "std".into()];
        header.extra = serde_json::json!({
            "flagged": self.stats.flagged,
            "objective_trace": self.objective_trace,
        });
        let d = self.stats.mean.len();
        Artifact {
            header,
            matrices: vec![
                self.centroids.clone(),
                Matrix::from_vec(1, d, self.stats.mean.clone()),
                Matrix::from_vec(1, d, self.stats.std.clone()),
            ],
        }
    }

    pub fn from_artifact(a: &Artifact) -> Result<Self> {
        a.expect_type("codebook")?;
        Ok(Codebook {
            centroids: a.matrix("centroids")?.clone(),
            stats: NormalizationStats {
                mean: a.matrix("mean")?.as_slice().to_vec(),
                std: a.matrix("std")?.as_slice().to_vec(),
                flagged: serde_json::from_value(a.header.extra["flagged"].clone())?,
            },
            params: serde_json::from_value(a.header.hyperparameters.clone())?,
            objective_trace: serde_json::from_value(a.header.extra["objective_trace"].clone())?,
        })
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid by Euclidean distance; ties go to the lowest index.
pub fn nearest_centroid(centroids: &Matrix, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.row_iter().enumerate() {
        let d = sq_dist(row, x);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(centroids: &Matrix, frames: &Matrix, batch: &[usize]) -> Vec<(usize, f64)> {
    if batch.len() >= PARALLEL_ASSIGN_MIN {
        batch
            .par_iter()
            .map(|&i| nearest_centroid(centroids, frames.row(i)))
            .collect()
    } else {
        batch
            .iter()
            .map(|&i| nearest_centroid(centroids, frames.row(i)))
            .collect()
    }
}

/// k-means++ seeding: first centre uniform, then proportional to squared
/// distance from the chosen set.
fn kmeans_plus_plus(frames: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    let n = frames.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = frames.row_iter().map(|r| sq_dist(r, frames.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return Err(Error::TooFewFrames {
                k,
                frames: chosen.len(),
            });
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            acc += d;
            if d > 0.0 && acc > target {
                pick = Some(i);
                break;
            }
        }
        // rounding can leave `target` just past the last positive weight
        let pick = pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("positive total"));
        chosen.push(pick);
        let c = frames.row(pick);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(frames.row(i), c));
        }
    }
    let rows: Vec<&[f64]> = chosen.iter().map(|&i| frames.row(i)).collect();
    Ok(Matrix::from_rows(&rows))
}

/// Mini-batch k-means over normalized frames. Each centroid moves towards
/// its assigned points with rate `1 / count`, counts persisting across
/// batches. When `batch_size >= frames` every iteration is a full Lloyd
/// step over all frames. A centroid that receives no point in a batch is
/// moved onto the farthest point of that batch's largest cluster.
pub fn fit_codebook(frames: &Matrix, stats: NormalizationStats, params: &CodebookParams) -> Result<Codebook> {
    let n = frames.rows();
    let k = params.k;
    if k == 0 {
        return Err(Error::InvalidHyperparameters("codebook size must be at least 1".into()));
    }
    if n < k {
        return Err(Error::TooFewFrames { k, frames: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centroids = kmeans_plus_plus(frames, k, &mut rng)?;
    let mut counts = vec![0u64; k];
    let mut objective_trace = Vec::with_capacity(params.iterations);
    let full_batch = params.batch_size >= n;
    let mut batch: Vec<usize> = Vec::with_capacity(params.batch_size.min(n));

    for _ in 0..params.iterations {
        batch.clear();
        if full_batch {
            batch.extend(0..n);
        } else {
            batch.extend((0..params.batch_size).map(|_| rng.random_range(0..n)));
        }
        let assignments = assign(&centroids, frames, &batch);
        objective_trace.push(assignments.iter().map(|a| a.1).sum());

        let mut members = vec![0usize; k];
        if full_batch {
            // plain Lloyd step: every centroid becomes the mean of its points
            let mut sums = Matrix::zeros(k, frames.cols());
            for (&i, &(c, _)) in batch.iter().zip(&assignments) {
                members[c] += 1;
                for (s, x) in sums.row_mut(c).iter_mut().zip(frames.row(i)) {
                    *s += x;
                }
            }
            for c in (0..k).filter(|&c| members[c] > 0) {
                counts[c] += members[c] as u64;
                let m = members[c] as f64;
                for (cv, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *cv = s / m;
                }
            }
        } else {
            for (&i, &(c, _)) in batch.iter().zip(&assignments) {
                members[c] += 1;
                counts[c] += 1;
                let lr = 1.0 / counts[c] as f64;
                let x = frames.row(i);
                for (cv, xv) in centroids.row_mut(c).iter_mut().zip(x) {
                    *cv += lr * (xv - *cv);
                }
            }
        }

        let empty: Vec<usize> = (0..k).filter(|&c| members[c] == 0).collect();
        if !empty.is_empty() {
            reseed_empty(
                &mut centroids,
                &mut counts,
                frames,
                &batch,
                &assignments,
                &members,
                &empty,
            );
        }
    }

    if let Some((a, b)) = duplicate_pair(&centroids) {
        warn!("codebook centroids {a} and {b} coincide");
    }
    Ok(Codebook {
        centroids,
        stats,
        params: params.clone(),
        objective_trace,
    })
}

fn reseed_empty(
    centroids: &mut Matrix,
    counts: &mut [u64],
    frames: &Matrix,
    batch: &[usize],
    assignments: &[(usize, f64)],
    members: &[usize],
    empty: &[usize],
) {
    let largest = (0..members.len())
        .max_by(|&a, &b| members[a].cmp(&members[b]).then(b.cmp(&a)))
        .expect("k >= 1");
    let mut candidates: Vec<(f64, usize)> = batch
        .iter()
        .zip(assignments)
        .filter(|(_, a)| a.0 == largest)
        .map(|(&i, _)| (sq_dist(frames.row(i), centroids.row(largest)), i))
        .filter(|(d, _)| *d > 0.0)
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    candidates.dedup_by(|a, b| frames.row(a.1) == frames.row(b.1));

    for (&c, (_, i)) in empty.iter().zip(candidates) {
        let x = frames.row(i).to_vec();
        // never duplicate an existing centroid
        if centroids.row_iter().any(|row| row == x.as_slice()) {
            continue;
        }
        centroids.row_mut(c).copy_from_slice(&x);
        counts[c] = 1;
    }
}

fn duplicate_pair(centroids: &Matrix) -> Option<(usize, usize)> {
    for a in 0..centroids.rows() {
        for b in (a + 1)..centroids.rows() {
            if sq_dist(centroids.row(a), centroids.row(b)) == 0.0 {
                return Some((a, b));
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoawVector {
    pub programme_id: String,
    /// Relative frequency of each codeword; sums to one.
    pub histogram: Vec<f64>,
}

/// Normalizes raw frames with the codebook's statistics, assigns each to its
/// nearest centroid and returns the L1-normalized histogram.
pub fn encode_boaw(features: &FrameFeatureMatrix, codebook: &Codebook) -> Result<BoawVector> {
    let frames = features.frames();
    if frames == 0 {
        return Err(Error::InsufficientFrames(0));
    }
    if features.rows.cols() != codebook.centroids.cols() {
        return Err(Error::DimensionMismatch {
            expected: codebook.centroids.cols(),
            actual: features.rows.cols(),
        });
    }
    let mut counts = vec![0usize; codebook.k()];
    for row in features.rows.row_iter() {
        let z = codebook.stats.apply(row);
        counts[nearest_centroid(&codebook.centroids, &z).0] += 1;
    }
    Ok(BoawVector {
        programme_id: features.programme_id.clone(),
        histogram: counts.iter().map(|&c| c as f64 / frames as f64).collect(),
    })
}
