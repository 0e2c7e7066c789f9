//! Cosine similarity matrices and their combination across modalities.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{read_u64, truncated};
use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};

pub const SIMM_MAGIC: &[u8; 4] = b"SIMM";
pub const SIMM_VERSION: u32 = 1;
pub const FUSED_LABEL: &str = "FUS";
pub const MIDDLE_LABEL: &str = "MID";

/// Vectors with a smaller L2 norm are treated as zero.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    Lsi,
    D2v,
    Aud,
    Md,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Lsi, Modality::D2v, Modality::Aud, Modality::Md];

    pub fn label(self) -> &'static str {
        match self {
            Modality::Lsi => "LSI",
            Modality::D2v => "D2V",
            Modality::Aud => "AUD",
            Modality::Md => "MD",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LSI" => Ok(Modality::Lsi),
            "D2V" => Ok(Modality::D2v),
            "AUD" => Ok(Modality::Aud),
            "MD" => Ok(Modality::Md),
            other => Err(format!("unknown modality {other:?} (expected LSI, D2V, AUD or MD)")),
        }
    }
}

/// `u·v / (|u| |v|)`, or 0 when either norm is below [`DEGENERATE_NORM`].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok(cosine_unchecked(u, v, dot(u, u), dot(v, v)))
}

/// Takes squared norms so that `cosine(v, v)` is exactly 1.
fn cosine_unchecked(u: &[f64], v: &[f64], nu2: f64, nv2: f64) -> f64 {
    const MIN_SQUARED: f64 = DEGENERATE_NORM * DEGENERATE_NORM;
    if nu2 < MIN_SQUARED || nv2 < MIN_SQUARED {
        return 0.0;
    }
    (dot(u, v) / (nu2 * nv2).sqrt()).clamp(-1.0, 1.0)
}

/// Symmetric n x n similarity matrix over an ordered programme list.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub label: String,
    ids: Vec<String>,
    values: Matrix,
}

impl SimilarityMatrix {
    pub fn new(label: impl Into<String>, ids: Vec<String>, values: Matrix) -> Result<Self> {
        if values.rows() != ids.len() || values.cols() != ids.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} ids but a {}x{} matrix",
                ids.len(),
                values.rows(),
                values.cols()
            )));
        }
        Ok(SimilarityMatrix {
            label: label.into(),
            ids,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(SIMM_MAGIC)?;
        w.write_all(&SIMM_VERSION.to_le_bytes())?;
        w.write_all(&(self.n() as u64).to_le_bytes())?;
        for id in &self.ids {
            let bytes = id.as_bytes();
            let len = u32::try_from(bytes.len()).map_err(|_| Error::Format(format!("programme id too long: {id}")))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(bytes)?;
        }
        for v in self.values.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// SIMM files carry no label, so the caller supplies one.
    pub fn read_from<R: Read>(mut r: R, label: impl Into<String>) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != SIMM_MAGIC {
            return Err(Error::Format("not a SIMM file".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(truncated)?;
        let version = u32::from_le_bytes(word);
        if version != SIMM_VERSION {
            return Err(Error::Format(format!("unsupported SIMM version {version}")));
        }
        let n = usize::try_from(read_u64(&mut r)?).map_err(|_| Error::Format("matrix too large".into()))?;
        let mut ids = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            r.read_exact(&mut word).map_err(truncated)?;
            let mut bytes = vec![0u8; u32::from_le_bytes(word) as usize];
            r.read_exact(&mut bytes).map_err(truncated)?;
            ids.push(String::from_utf8(bytes).map_err(|_| Error::Format("programme id is not UTF-8".into()))?);
        }
        let cells = n
            .checked_mul(n)
            .ok_or_else(|| Error::Format("matrix too large".into()))?;
        let mut data = Vec::with_capacity(cells.min(1 << 24));
        let mut buf = [0u8; 8];
        for _ in 0..cells {
            r.read_exact(&mut buf).map_err(truncated)?;
            data.push(f64::from_le_bytes(buf));
        }
        SimilarityMatrix::new(label, ids, Matrix::from_vec(n, n, data))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(std::fs::File::create(path)?))
    }

    /// Loads a SIMM file, labelling it with the file stem.
    pub fn load(path: &Path) -> Result<Self> {
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let file = std::fs::File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        SimilarityMatrix::read_from(BufReader::new(file), label)
    }
}

/// Pairwise cosine similarities. Each entry of the upper triangle is
/// computed once and mirrored. Programmes with a zero vector get similarity
/// 0 to everything and 1 on the diagonal.
pub fn similarity_matrix(label: impl Into<String>, ids: &[String], vectors: &[Vec<f64>]) -> Result<SimilarityMatrix> {
    let label = label.into();
    if ids.len() != vectors.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} ids but {} vectors",
            ids.len(),
            vectors.len()
        )));
    }
    let n = ids.len();
    let dim = vectors.first().map_or(0, Vec::len);
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: v.len(),
        });
    }
    let norms: Vec<f64> = vectors.iter().map(|v| dot(v, v)).collect();
    for (id, nv) in ids.iter().zip(&norms) {
        if nv.sqrt() < DEGENERATE_NORM {
            warn!("{label}: programme {id} has a zero vector; its similarities are 0");
        }
    }
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        cosine_unchecked(&vectors[i], &vectors[j], norms[i], norms[j])
                    }
                })
                .collect()
        })
        .collect();
    let mut values = Matrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &s) in row.iter().enumerate() {
            values[(i, i + off)] = s;
            values[(i + off, i)] = s;
        }
    }
    SimilarityMatrix::new(label, ids.to_vec(), values)
}

/// Non-negative, finite per-modality weights with at least one positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct FusionWeights(BTreeMap<String, f64>);

impl FusionWeights {
    pub fn new(weights: BTreeMap<String, f64>) -> Result<Self> {
        for (modality, &weight) in &weights {
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::InvalidWeight {
                    modality: modality.clone(),
                    weight,
                });
            }
        }
        if !weights.values().any(|&w| w > 0.0) {
            return Err(Error::AllZeroWeights);
        }
        Ok(FusionWeights(weights))
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        Self::new(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    /// `{LSI: 0.7, D2V: 1.5, AUD: 0.2, MD: 0.65}`.
    pub fn reference() -> Self {
        Self::from_pairs([("LSI", 0.7), ("D2V", 1.5), ("AUD", 0.2), ("MD", 0.65)]).expect("valid weights")
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.0.get(label).copied()
    }

    pub fn as_map(&self) -> &BTreeMap<String, f64> {
        &self.0
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|(k, v)| (k.clone(), v * c)).collect())
    }
}

impl TryFrom<BTreeMap<String, f64>> for FusionWeights {
    type Error = Error;

    fn try_from(map: BTreeMap<String, f64>) -> Result<Self> {
        FusionWeights::new(map)
    }
}

impl From<FusionWeights> for BTreeMap<String, f64> {
    fn from(w: FusionWeights) -> Self {
        w.0
    }
}

/// `S = Σ w_m S_m / Σ w_m`, labelled [`FUSED_LABEL`]. Weights for modalities
/// not supplied are ignored.
pub fn late_fuse(matrices: &[SimilarityMatrix], weights: &FusionWeights) -> Result<SimilarityMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no similarity matrices to fuse".into()))?;
    for m in &matrices[1..] {
        if m.ids != first.ids {
            return Err(Error::ShapeMismatch(format!(
                "{} and {} cover different programmes or orders",
                first.label, m.label
            )));
        }
    }
    let ws: Vec<f64> = matrices
        .iter()
        .map(|m| {
            weights
                .get(&m.label)
                .ok_or_else(|| Error::UnknownModalityWeight(m.label.clone()))
        })
        .collect::<Result<_>>()?;
    let total: f64 = ws.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllZeroWeights);
    }
    let n = first.n();
    let data: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|cell| {
            let acc: f64 = matrices
                .iter()
                .zip(&ws)
                .map(|(m, w)| w * m.values.as_slice()[cell])
                .sum();
            acc / total
        })
        .collect();
    SimilarityMatrix::new(FUSED_LABEL, first.ids.clone(), Matrix::from_vec(n, n, data))
}

/// Per-programme vectors of one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityVectors {
    pub label: String,
    pub ids: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

impl ModalityVectors {
    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn similarity(&self) -> Result<SimilarityMatrix> {
        similarity_matrix(self.label.clone(), &self.ids, &self.vectors)
    }
}

/// Concatenates unit-normalized, weighted blocks in the order given. The
/// programme order of the first set is kept. `block_weights` defaults to 1.
pub fn middle_fuse(sets: &[ModalityVectors], block_weights: Option<&[f64]>) -> Result<ModalityVectors> {
    let first = sets
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no modalities to concatenate".into()))?;
    if let Some(w) = block_weights {
        if w.len() != sets.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} block weights for {} modalities",
                w.len(),
                sets.len()
            )));
        }
    }
    let lookups: Vec<HashMap<&str, usize>> = sets
        .iter()
        .map(|s| s.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect())
        .collect();
    for (s, lookup) in sets.iter().zip(&lookups) {
        if let Some(id) = first.ids.iter().find(|id| !lookup.contains_key(id.as_str())) {
            return Err(Error::MissingModality {
                modality: s.label.clone(),
                programme: id.clone(),
            });
        }
        if let Some(id) = s.ids.iter().find(|id| !lookups[0].contains_key(id.as_str())) {
            return Err(Error::MissingModality {
                modality: first.label.clone(),
                programme: id.clone(),
            });
        }
    }
    let total_dim: usize = sets.iter().map(ModalityVectors::dim).sum();
    let vectors = first
        .ids
        .iter()
        .map(|id| {
            let mut out = Vec::with_capacity(total_dim);
            for (b, (s, lookup)) in sets.iter().zip(&lookups).enumerate() {
                let v = &s.vectors[lookup[id.as_str()]];
                let w = block_weights.map_or(1.0, |w| w[b]);
                let nv = norm(v);
                if nv < DEGENERATE_NORM {
                    out.extend(std::iter::repeat_n(0.0, v.len()));
                } else {
                    out.extend(v.iter().map(|x| w * x / nv));
                }
            }
            out
        })
        .collect();
    Ok(ModalityVectors {
        label: MIDDLE_LABEL.into(),
        ids: first.ids.clone(),
        vectors,
    })
}

/// Every item except the query, by score descending then id ascending,
/// truncated to `top_n`.
pub fn rank_items(s: &SimilarityMatrix, query_index: usize, top_n: usize) -> Result<Vec<(String, f64)>> {
    Ok(rank_indices(s, query_index, top_n)?
        .into_iter()
        .map(|j| (s.ids[j].clone(), s.get(query_index, j)))
        .collect())
}

/// Like [`rank_items`] but returns indices into the programme list.
pub fn rank_indices(s: &SimilarityMatrix, query_index: usize, top_n: usize) -> Result<Vec<usize>> {
    let n = s.n();
    if query_index >= n {
        return Err(Error::IndexOutOfRange {
            index: query_index,
            len: n,
        });
    }
    let row = s.row(query_index);
    let mut items: Vec<usize> = (0..n).filter(|&j| j != query_index).collect();
    items.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then_with(|| s.ids[a].cmp(&s.ids[b])));
    items.truncate(top_n);
    Ok(items)
}
