//! Corpus ingestion: manifest, subtitles and audio.

mod audio;
mod subtitles;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use audio::{load_audio, resample, MonoSignal, RESAMPLER_TAPS, SAMPLE_RATE};
pub use subtitles::{load_subtitles, strip_subtitles, SubtitleOptions};

use crate::error::{read_file, Error, Result};
use crate::metavec::{parse_genre_path, GenrePath};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub subtitle_path: PathBuf,
    pub audio_path: PathBuf,
    pub genres: Vec<String>,
}

impl ManifestEntry {
    pub fn genre_paths(&self) -> Result<Vec<GenrePath>> {
        self.genres.iter().map(|g| parse_genre_path(g)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "programmes")]
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Checks id uniqueness and genre well-formedness.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            let ctx = || format!("entry {i} ({:?})", e.id);
            if e.id.trim().is_empty() {
                return Err(Error::manifest(format!("entry {i}"), "empty id"));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(Error::DuplicateId(e.id.clone()));
            }
            if e.genres.is_empty() {
                return Err(Error::manifest(ctx(), "no genre paths"));
            }
            for g in &e.genres {
                parse_genre_path(g).map_err(|err| Error::manifest(ctx(), err.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.id.clone()).collect()
    }
}

/// Reads a JSON manifest. Relative subtitle/audio paths are resolved against
/// the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let bytes = read_file(path)?;
    let mut manifest: Manifest = serde_json::from_slice(&bytes)
        .map_err(|e| Error::manifest(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
    manifest.validate()?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    for e in &mut manifest.entries {
        if e.subtitle_path.is_relative() {
            e.subtitle_path = base.join(&e.subtitle_path);
        }
        if e.audio_path.is_relative() {
            e.audio_path = base.join(&e.audio_path);
        }
    }
    Ok(manifest)
}
