//! On-disk layout of a pipeline output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mmsim_core::artifact::{Artifact, ArtifactHeader};
use mmsim_core::{Matrix, ModalityVectors, SimilarityMatrix};

use crate::DataError;

pub struct Store {
    root: PathBuf,
}

/// One ingested programme as cached on disk (frames live in a sibling file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestRecord {
    pub id: String,
    pub key: String,
    pub tokens: Vec<String>,
    pub genres: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub key: String,
}

impl Store {
    pub fn new(root: &Path) -> Self {
        Store {
            root: root.to_path_buf(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, name: &str) -> Result<PathBuf> {
        let d = self.root.join(name);
        std::fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
        Ok(d)
    }

    fn index_path(&self) -> PathBuf {
        self.root.join("ingest").join("index.json")
    }

    pub fn read_index(&self) -> Result<Option<Vec<IndexEntry>>> {
        let p = self.index_path();
        if !p.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        Ok(Some(
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?,
        ))
    }

    /// Corpus order as recorded by the last ingest.
    pub fn require_index(&self) -> Result<Vec<IndexEntry>> {
        self.read_index()?.ok_or_else(|| {
            DataError(format!(
                "no ingested corpus under {}; run `mmsim ingest` first",
                self.root.display()
            ))
            .into()
        })
    }

    pub fn write_index(&self, entries: &[IndexEntry]) -> Result<()> {
        self.dir("ingest")?;
        write_atomic(&self.index_path(), serde_json::to_string_pretty(entries)?.as_bytes())
    }

    pub fn record_path(&self, id: &str) -> PathBuf {
        self.root.join("ingest").join(format!("{}.json", file_stem(id)))
    }

    pub fn features_path(&self, id: &str) -> PathBuf {
        self.root.join("ingest").join(format!("{}.features", file_stem(id)))
    }

    pub fn read_record(&self, id: &str) -> Result<IngestRecord> {
        let p = self.record_path(id);
        let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn vectors_path(&self, label: &str) -> PathBuf {
        self.root.join("vectors").join(format!("{label}.vec"))
    }

    pub fn model_path(&self, name: &str) -> PathBuf {
        self.root.join("models").join(name)
    }

    pub fn similarity_path(&self, label: &str) -> PathBuf {
        self.root.join("similarity").join(format!("{label}.simm"))
    }

    pub fn report_path(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }

    pub fn load_similarity(&self, label: &str) -> Result<SimilarityMatrix> {
        let p = self.similarity_path(label);
        if !p.exists() {
            return Err(DataError(format!(
                "similarity matrix for {label} not found at {}; run `mmsim fuse` first",
                p.display()
            ))
            .into());
        }
        Ok(SimilarityMatrix::load(&p)?.with_label(label))
    }
}

/// Programme ids become file names; anything outside `[A-Za-z0-9._-]` is
/// replaced and a short hash keeps names distinct.
fn file_stem(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if safe == id && !id.starts_with('.') {
        safe
    } else {
        format!("{safe}-{}", &hex::encode(Sha256::digest(id.as_bytes()))[..12])
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Incremental SHA-256 over tagged, length-prefixed parts.
pub struct KeyBuilder(Sha256);

impl KeyBuilder {
    pub fn new(domain: &str) -> Self {
        let mut k = KeyBuilder(Sha256::new());
        k.part(domain.as_bytes());
        k
    }

    pub fn part(&mut self, bytes: &[u8]) -> &mut Self {
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
        self
    }

    pub fn json<T: Serialize>(&mut self, value: &T) -> Result<&mut Self> {
        let bytes = serde_json::to_vec(value)?;
        Ok(self.part(&bytes))
    }

    pub fn finish(&mut self) -> String {
        hex::encode(std::mem::take(&mut self.0).finalize())
    }
}

pub fn save_vectors(path: &Path, vectors: &ModalityVectors, key: &str) -> Result<()> {
    let n = vectors.ids.len();
    let dim = vectors.dim();
    let mut header = ArtifactHeader::new("vectors");
    header.dims = BTreeMap::from([("n".to_string(), n), ("dim".to_string(), dim)]);
    header.matrices = vec!["vectors".into()];
    header.extra = serde_json::json!({ "label": vectors.label, "ids": vectors.ids, "key": key });
    let data = vectors.vectors.iter().flatten().copied().collect();
    let artifact = Artifact {
        header,
        matrices: vec![Matrix::from_vec(n, dim, data)],
    };
    let mut buf = Vec::new();
    artifact.write_to(&mut buf)?;
    write_atomic(path, &buf)
}

pub fn load_vectors(path: &Path) -> Result<(ModalityVectors, String)> {
    let a = Artifact::load(path).with_context(|| format!("loading {}", path.display()))?;
    a.expect_type("vectors")?;
    let m = a.matrix("vectors")?;
    let label = serde_json::from_value(a.header.extra["label"].clone())?;
    let ids = serde_json::from_value(a.header.extra["ids"].clone())?;
    let key = serde_json::from_value(a.header.extra["key"].clone())?;
    Ok((
        ModalityVectors {
            label,
            ids,
            vectors: m.row_iter().map(<[f64]>::to_vec).collect(),
        },
        key,
    ))
}

/// The key stored in an existing vector file, if it can be read.
pub fn stored_vector_key(path: &Path) -> Option<String> {
    let file = std::fs::File::open(path).ok()?;
    let mut line = String::new();
    std::io::BufRead::read_line(&mut std::io::BufReader::new(file), &mut line).ok()?;
    let header: ArtifactHeader = serde_json::from_str(line.trim_end()).ok()?;
    header.extra.get("key")?.as_str().map(str::to_string)
}
