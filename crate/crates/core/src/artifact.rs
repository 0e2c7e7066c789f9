//! Model artifact files.
//!
//! Layout: one line of compact UTF-8 JSON (the header, terminated by `\n`),
//! followed by the matrices listed in `header.matrices`, in order. Each
//! matrix is `rows: u64 LE`, `cols: u64 LE`, then `rows * cols` little-endian
//! `f64` values in row-major order.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub format_version: u32,
    pub type_tag: String,
    #[serde(default)]
    pub dims: BTreeMap<String, usize>,
    #[serde(default)]
    pub hyperparameters: serde_json::Value,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub parallel: bool,
    /// Names of the matrices that follow the header, in file order.
    pub matrices: Vec<String>,
    /// Type-specific payload (vocabularies, programme ids, ...).
    #[serde(default)]
    pub extra: serde_json::Value,
}

impl ArtifactHeader {
    pub fn new(type_tag: impl Into<String>) -> Self {
        ArtifactHeader {
            format_version: FORMAT_VERSION,
            type_tag: type_tag.into(),
            dims: BTreeMap::new(),
            hyperparameters: serde_json::Value::Null,
            seed: None,
            parallel: false,
            matrices: Vec::new(),
            extra: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub header: ArtifactHeader,
    pub matrices: Vec<Matrix>,
}

impl Artifact {
    pub fn matrix(&self, name: &str) -> Result<&Matrix> {
        self.header
            .matrices
            .iter()
            .position(|m| m == name)
            .map(|i| &self.matrices[i])
            .ok_or_else(|| Error::Format(format!("artifact has no matrix named {name:?}")))
    }

    pub fn expect_type(&self, tag: &str) -> Result<()> {
        if self.header.type_tag == tag {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "expected a {tag:?} artifact, found {:?}",
                self.header.type_tag
            )))
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        if self.header.matrices.len() != self.matrices.len() {
            return Err(Error::Format(format!(
                "header names {} matrices but {} were supplied",
                self.header.matrices.len(),
                self.matrices.len()
            )));
        }
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for m in &self.matrices {
            write_matrix(&mut w, m)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = Vec::new();
        r.read_until(b'\n', &mut line)?;
        if line.last() != Some(&b'\n') {
            return Err(Error::Format("missing header terminator".into()));
        }
        line.pop();
        let header: ArtifactHeader = serde_json::from_slice(&line)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported artifact version {}",
                header.format_version
            )));
        }
        let mut matrices = Vec::with_capacity(header.matrices.len());
        for _ in &header.matrices {
            matrices.push(read_matrix(&mut r)?);
        }
        Ok(Artifact { header, matrices })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = crate::error::read_file(path)?;
        Artifact::read_from(bytes.as_slice())
    }
}

pub fn write_matrix<W: Write>(w: &mut W, m: &Matrix) -> Result<()> {
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(m.as_slice().len() * 8);
    for v in m.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_matrix<R: Read>(r: &mut R) -> Result<Matrix> {
    let rows = read_u64(r)? as usize;
    let cols = read_u64(r)? as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("matrix size overflow".into()))?;
    let mut bytes = vec![
        0u8;
        len.checked_mul(8)
            .ok_or_else(|| Error::Format("matrix size overflow".into()))?
    ];
    r.read_exact(&mut bytes).map_err(truncated)?;
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(Matrix::from_vec(rows, cols, data))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("unexpected end of file".into())
    } else {
        Error::Io(e)
    }
}
