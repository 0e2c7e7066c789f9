use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mmsim_core::corpus::SubtitleOptions;
use mmsim_core::eval::{DEFAULT_CUTOFFS, DEFAULT_RELEVANCE_M};
use mmsim_core::pipeline::{AudioParams, LsiSettings};
use mmsim_core::textvec::PvdmParams;
use mmsim_core::FusionWeights;

use crate::UsageError;

/// Ground truth for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelevanceSource {
    /// JSON `{programme_id: [relevant ids]}`.
    File(PathBuf),
    /// SIMM behavioural similarity; the top `m` of each row are relevant.
    UserMatrix(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetadataSettings {
    /// Weight per genre depth, the last repeating; empty means all ones.
    pub level_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSettings {
    pub weights: FusionWeights,
    /// Also write the middle-fusion (concatenation) matrix.
    pub middle: bool,
    pub block_weights: Option<Vec<f64>>,
}

impl Default for FusionSettings {
    fn default() -> Self {
        FusionSettings {
            weights: FusionWeights::reference(),
            middle: false,
            block_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub relevance: Option<RelevanceSource>,
    pub m: usize,
    /// Label of the similarity matrix whose `1 - sim` measures diversity.
    pub diversity: String,
    pub cutoffs: Vec<usize>,
    /// Candidate weights per modality for `search-weights`.
    pub grid: BTreeMap<String, Vec<f64>>,
    pub objective_k: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        let axis = vec![0.0, 0.25, 0.5, 1.0, 1.5, 2.0];
        EvalSettings {
            relevance: None,
            m: DEFAULT_RELEVANCE_M,
            diversity: "MD".into(),
            cutoffs: DEFAULT_CUTOFFS.to_vec(),
            grid: ["LSI", "D2V", "AUD", "MD"]
                .iter()
                .map(|m| (m.to_string(), axis.clone()))
                .collect(),
            objective_k: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    pub output_dir: PathBuf,
    /// Seeds every stochastic stage; per-stage seeds are overwritten.
    pub seed: Option<u64>,
    pub subtitles: SubtitleOptions,
    pub lsi: LsiSettings,
    pub pvdm: PvdmParams,
    pub audio: AudioParams,
    pub metadata: MetadataSettings,
    pub fusion: FusionSettings,
    pub evaluation: EvalSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            manifest: PathBuf::new(),
            output_dir: PathBuf::from("mmsim-out"),
            seed: None,
            subtitles: SubtitleOptions::default(),
            lsi: LsiSettings::default(),
            pvdm: PvdmParams::default(),
            audio: AudioParams::default(),
            metadata: MetadataSettings::default(),
            fusion: FusionSettings::default(),
            evaluation: EvalSettings::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses the JSON config; relative paths are resolved against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        if config.manifest.as_os_str().is_empty() {
            return Err(UsageError(format!(
                "config {} does not name a manifest",
                path.display()
            )));
        }
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        config.manifest = resolve(base, &config.manifest);
        config.output_dir = resolve(base, &config.output_dir);
        config.evaluation.relevance = config.evaluation.relevance.map(|r| match r {
            RelevanceSource::File(p) => RelevanceSource::File(resolve(base, &p)),
            RelevanceSource::UserMatrix(p) => RelevanceSource::UserMatrix(resolve(base, &p)),
        });
        Ok(config)
    }

    /// Copies the global seed into every stochastic stage.
    pub fn propagate_seed(&mut self) {
        if let Some(seed) = self.seed {
            self.lsi.params.svd.seed = seed;
            self.pvdm.seed = seed;
            self.audio.codebook.seed = seed;
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_relative() {
        base.join(p)
    } else {
        p.to_path_buf()
    }
}
