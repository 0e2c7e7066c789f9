//! Ranking metrics (MAP@k, ILD@k) and fusion-weight search.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{read_file, Error, Result};
use crate::fusion::{late_fuse, rank_indices, FusionWeights, SimilarityMatrix};

pub const DEFAULT_CUTOFFS: [usize; 2] = [10, 20];
pub const DEFAULT_RELEVANCE_M: usize = 20;

/// Where a relevance standard came from; echoed in every report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum Provenance {
    File { path: String },
    Derived { from: String, m: usize },
}

/// Per-programme sets of relevant programmes, indexed by corpus position.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceSets {
    ids: Vec<String>,
    sets: Vec<BTreeSet<usize>>,
    pub provenance: Provenance,
}

impl RelevanceSets {
    /// Programmes absent from `map` get an empty set. Self-relevance is
    /// dropped with a warning.
    pub fn from_map(ids: &[String], map: &BTreeMap<String, Vec<String>>, provenance: Provenance) -> Result<Self> {
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::UnknownProgramme(id.to_string()))
        };
        let mut sets = vec![BTreeSet::new(); ids.len()];
        for (query, relevant) in map {
            let q = lookup(query)?;
            for r in relevant {
                let j = lookup(r)?;
                if j == q {
                    warn!("programme {query} listed as relevant to itself; ignored");
                    continue;
                }
                sets[q].insert(j);
            }
        }
        Ok(RelevanceSets {
            ids: ids.to_vec(),
            sets,
            provenance,
        })
    }

    /// Reads `{programme_id: [relevant ids]}` JSON.
    pub fn load(path: &Path, ids: &[String]) -> Result<Self> {
        let map: BTreeMap<String, Vec<String>> = serde_json::from_slice(&read_file(path)?)?;
        Self::from_map(
            ids,
            &map,
            Provenance::File {
                path: path.display().to_string(),
            },
        )
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn relevant(&self, query: usize) -> &BTreeSet<usize> {
        &self.sets[query]
    }

    pub fn to_map(&self) -> BTreeMap<String, Vec<String>> {
        self.ids
            .iter()
            .zip(&self.sets)
            .map(|(id, set)| (id.clone(), set.iter().map(|&j| self.ids[j].clone()).collect()))
            .collect()
    }
}

/// The `m` most similar other programmes of each row (ties by ascending id).
pub fn derive_relevance(user_sim: &SimilarityMatrix, m: usize) -> Result<RelevanceSets> {
    let n = user_sim.n();
    if m == 0 || m + 1 > n {
        return Err(Error::InvalidM {
            m,
            max: n.saturating_sub(1),
        });
    }
    let sets = (0..n)
        .map(|q| rank_indices(user_sim, q, m).map(|r| r.into_iter().collect()))
        .collect::<Result<_>>()?;
    Ok(RelevanceSets {
        ids: user_sim.ids().to_vec(),
        sets,
        provenance: Provenance::Derived {
            from: user_sim.label.clone(),
            m,
        },
    })
}

/// `AP@k = (1 / min(|R|, k)) Σ_{i ≤ k, ranked[i] ∈ R} precision@i`; 0 when `R`
/// is empty.
pub fn average_precision<T: Ord>(ranked: &[T], relevant: &BTreeSet<T>, k: usize) -> f64 {
    let denom = relevant.len().min(k);
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, item) in ranked.iter().take(k).enumerate() {
        if relevant.contains(item) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / denom as f64
}

fn check_alignment(a: &[String], b: &[String], what: &str) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!(
            "{what} does not share the model's programme order"
        )));
    }
    Ok(())
}

/// Mean AP@k over programmes with a non-empty relevant set, as a percentage.
pub fn map_at_k(model: &SimilarityMatrix, relevance: &RelevanceSets, k: usize) -> Result<f64> {
    check_alignment(model.ids(), relevance.ids(), "relevance")?;
    let queries: Vec<usize> = (0..model.n()).filter(|&q| !relevance.relevant(q).is_empty()).collect();
    if queries.is_empty() {
        return Err(Error::NoEvaluableQueries);
    }
    let aps: Vec<f64> = queries
        .par_iter()
        .map(|&q| rank_indices(model, q, k).map(|ranked| average_precision(&ranked, relevance.relevant(q), k)))
        .collect::<Result<_>>()?;
    Ok(100.0 * aps.iter().sum::<f64>() / aps.len() as f64)
}

fn list_diversity(list: &[usize], distance: &SimilarityMatrix) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (a, &i) in list.iter().enumerate() {
        for &j in &list[a + 1..] {
            sum += 1.0 - distance.get(i, j);
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        sum / pairs as f64
    }
}

/// Mean pairwise `1 - sim` within each query's top-k list, averaged over all
/// queries, as a percentage. Zero (with a warning) when `k < 2`.
pub fn ild_at_k(model: &SimilarityMatrix, distance: &SimilarityMatrix, k: usize) -> Result<f64> {
    check_alignment(model.ids(), distance.ids(), "diversity source")?;
    if k < 2 {
        warn!("ILD@{k} is undefined for lists shorter than 2; reporting 0");
        return Ok(0.0);
    }
    let n = model.n();
    if n == 0 {
        return Ok(0.0);
    }
    let per_query: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|q| rank_indices(model, q, k).map(|list| list_diversity(&list, distance)))
        .collect::<Result<_>>()?;
    Ok(100.0 * per_query.iter().sum::<f64>() / n as f64)
}

pub fn map_column(k: usize) -> String {
    format!("MAP@{k}")
}

pub fn ild_column(k: usize) -> String {
    format!("ILD@{k}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub label: String,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub relevance: Provenance,
    pub diversity_source: String,
    pub cutoffs: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub models: Vec<ModelScores>,
    pub config: ReportConfig,
}

impl EvalReport {
    pub fn columns(&self) -> Vec<String> {
        self.config
            .cutoffs
            .iter()
            .flat_map(|&k| [map_column(k), ild_column(k)])
            .collect()
    }

    pub fn metric(&self, label: &str, column: &str) -> Option<f64> {
        self.models
            .iter()
            .find(|m| m.label == label)
            .and_then(|m| m.metrics.get(column).copied())
    }

    /// Plain-text table: one row per model, one column per metric.
    pub fn to_table(&self) -> String {
        let columns = self.columns();
        let label_width = self.models.iter().map(|m| m.label.len()).max().unwrap_or(0).max(5);
        let mut out = format!("{:<label_width$}", "Model");
        for c in &columns {
            let _ = write!(out, "  {c:>8}");
        }
        out.push('\n');
        for m in &self.models {
            let _ = write!(out, "{:<label_width$}", m.label);
            for c in &columns {
                let _ = write!(out, "  {:>8.2}", m.metrics[c]);
            }
            out.push('\n');
        }
        out
    }
}

/// MAP and ILD of every model at every cutoff.
pub fn evaluate(
    models: &[SimilarityMatrix],
    relevance: &RelevanceSets,
    diversity: &SimilarityMatrix,
    cutoffs: &[usize],
) -> Result<EvalReport> {
    if models.is_empty() {
        return Err(Error::NoModels);
    }
    let mut scored = Vec::with_capacity(models.len());
    for model in models {
        let mut metrics = BTreeMap::new();
        for &k in cutoffs {
            metrics.insert(map_column(k), map_at_k(model, relevance, k)?);
            metrics.insert(ild_column(k), ild_at_k(model, diversity, k)?);
        }
        scored.push(ModelScores {
            label: model.label.clone(),
            metrics,
        });
    }
    Ok(EvalReport {
        models: scored,
        config: ReportConfig {
            relevance: relevance.provenance.clone(),
            diversity_source: diversity.label.clone(),
            cutoffs: cutoffs.to_vec(),
            weights: None,
            seed: None,
        },
    })
}

/// One lattice point of a weight search, weights in modality order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub weights: Vec<f64>,
    pub map: f64,
    pub ild: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchOutcome {
    pub best: FusionWeights,
    /// Evaluation of the fused matrix at the best weights.
    pub report: EvalReport,
    pub labels: Vec<String>,
    pub sweep: Vec<SweepRow>,
    pub objective_k: usize,
}

impl GridSearchOutcome {
    pub fn write_sweep_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header: Vec<String> = self.labels.clone();
        header.push(map_column(self.objective_k));
        header.push(ild_column(self.objective_k));
        writeln!(w, "{}", header.join(","))?;
        for row in &self.sweep {
            let mut cells: Vec<String> = row.weights.iter().map(|v| v.to_string()).collect();
            cells.push(row.map.to_string());
            cells.push(row.ild.to_string());
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn lattice(grid: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for values in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

/// Exhaustive late-fusion weight search maximizing MAP@`objective_k`; ties go
/// to higher ILD@`objective_k`, then to the lexicographically smallest
/// weight vector (in the order of `matrices`). Lattice points whose weights
/// are all zero are skipped.
pub fn grid_search_weights(
    matrices: &[SimilarityMatrix],
    relevance: &RelevanceSets,
    diversity: &SimilarityMatrix,
    grid: &BTreeMap<String, Vec<f64>>,
    objective_k: usize,
    cutoffs: &[usize],
) -> Result<GridSearchOutcome> {
    if matrices.is_empty() {
        return Err(Error::NoModels);
    }
    let labels: Vec<String> = matrices.iter().map(|m| m.label.clone()).collect();
    let mut axes: Vec<&[f64]> = Vec::with_capacity(labels.len());
    for label in &labels {
        match grid.get(label) {
            Some(values) if !values.is_empty() => axes.push(values),
            _ => return Err(Error::EmptyGrid(label.clone())),
        }
    }
    for extra in grid.keys().filter(|k| !labels.contains(k)) {
        warn!("weight grid entry {extra} has no similarity matrix; ignored");
    }

    let points: Vec<Vec<f64>> = lattice(&axes)
        .into_iter()
        .filter(|p| p.iter().any(|&w| w > 0.0))
        .collect();
    if points.is_empty() {
        return Err(Error::AllZeroWeights);
    }
    let to_weights = |p: &[f64]| FusionWeights::from_pairs(labels.iter().cloned().zip(p.iter().copied()));
    let sweep: Vec<SweepRow> = points
        .par_iter()
        .map(|p| {
            let fused = late_fuse(matrices, &to_weights(p)?)?;
            Ok(SweepRow {
                weights: p.clone(),
                map: map_at_k(&fused, relevance, objective_k)?,
                ild: ild_at_k(&fused, diversity, objective_k)?,
            })
        })
        .collect::<Result<_>>()?;

    let best_row = sweep
        .iter()
        .reduce(|best, row| {
            let better = row
                .map
                .total_cmp(&best.map)
                .then(row.ild.total_cmp(&best.ild))
                .then_with(|| lex_cmp(&best.weights, &row.weights));
            if better.is_gt() {
                row
            } else {
                best
            }
        })
        .expect("non-empty lattice");
    let best = to_weights(&best_row.weights)?;
    let fused = late_fuse(matrices, &best)?;
    let mut report = evaluate(std::slice::from_ref(&fused), relevance, diversity, cutoffs)?;
    report.config.weights = Some(best.as_map().clone());
    Ok(GridSearchOutcome {
        best,
        report,
        labels,
        sweep,
        objective_k,
    })
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}
