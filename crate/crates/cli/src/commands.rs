use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{Context, Result};
use log::info;
use serde::Serialize;

use mmsim_core::audiovec::FrameFeatureMatrix;
use mmsim_core::corpus::{load_manifest, ManifestEntry, SubtitleOptions};
use mmsim_core::eval::{derive_relevance, evaluate, grid_search_weights, EvalReport, GridSearchOutcome, RelevanceSets};
use mmsim_core::fusion::{late_fuse, middle_fuse, rank_items, FUSED_LABEL, MIDDLE_LABEL};
use mmsim_core::metavec::parse_genre_path;
use mmsim_core::pipeline::{audio_vectors, d2v_vectors, ingest_programme, lsi_vectors, metadata_vectors};
use mmsim_core::textvec::TokenizedDoc;
use mmsim_core::{Modality, ModalityVectors, SimilarityMatrix};

use crate::config::{PipelineConfig, RelevanceSource};
use crate::store::{
    load_vectors, save_vectors, stored_vector_key, write_atomic, IndexEntry, IngestRecord, KeyBuilder, Store,
};
use crate::{DataError, UsageError};

const INGEST_DOMAIN: &str = "mmsim-ingest-1";
const VECTOR_DOMAIN: &str = "mmsim-vectors-1";

pub(crate) fn parse_modalities(raw: Option<&[String]>) -> Result<Vec<Modality>> {
    let Some(raw) = raw else {
        return Ok(Modality::ALL.to_vec());
    };
    let mut out = Vec::new();
    for item in raw.iter().filter(|s| !s.trim().is_empty()) {
        let m: Modality = item.parse().map_err(UsageError)?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(UsageError("--modalities is empty".into()).into());
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestStatus {
    Ingested,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub programmes: Vec<(String, IngestStatus)>,
}

fn ingest_key(entry: &ManifestEntry, opts: SubtitleOptions) -> Result<String> {
    let subtitles = std::fs::read(&entry.subtitle_path)
        .map_err(|e| DataError(format!("subtitles {}: {e}", entry.subtitle_path.display())))?;
    let audio = std::fs::read(&entry.audio_path)
        .map_err(|e| DataError(format!("audio {}: {e}", entry.audio_path.display())))?;
    Ok(KeyBuilder::new(INGEST_DOMAIN)
        .part(&subtitles)
        .part(&audio)
        .json(&entry.genres)?
        .json(&opts)?
        .finish())
}

/// Parses every manifest entry, reusing cached results whose inputs are
/// unchanged.
pub fn cmd_ingest(config: &PipelineConfig) -> Result<IngestSummary> {
    let manifest =
        load_manifest(&config.manifest).with_context(|| format!("manifest {}", config.manifest.display()))?;
    let store = Store::new(&config.output_dir);
    store.dir("ingest")?;
    let previous: BTreeMap<String, String> = store
        .read_index()?
        .unwrap_or_default()
        .into_iter()
        .map(|e| (e.id, e.key))
        .collect();

    let mut index = Vec::with_capacity(manifest.entries.len());
    let mut programmes = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let key = ingest_key(entry, config.subtitles).with_context(|| format!("programme {}", entry.id))?;
        let cached = previous.get(&entry.id) == Some(&key)
            && store.record_path(&entry.id).exists()
            && store.features_path(&entry.id).exists();
        if cached {
            info!("skipped {} (inputs unchanged)", entry.id);
            programmes.push((entry.id.clone(), IngestStatus::Skipped));
        } else {
            let p = ingest_programme(entry, config.subtitles).with_context(|| format!("programme {}", entry.id))?;
            let record = IngestRecord {
                id: p.id.clone(),
                key: key.clone(),
                tokens: p.doc.tokens,
                genres: p.genres.iter().map(ToString::to_string).collect(),
            };
            let mut buf = Vec::new();
            p.features.to_artifact().write_to(&mut buf)?;
            write_atomic(&store.features_path(&p.id), &buf)?;
            write_atomic(&store.record_path(&p.id), &serde_json::to_vec(&record)?)?;
            info!(
                "ingested {}: {} tokens, {} frames",
                p.id,
                record.tokens.len(),
                p.features.frames()
            );
            programmes.push((entry.id.clone(), IngestStatus::Ingested));
        }
        index.push(IndexEntry {
            id: entry.id.clone(),
            key,
        });
    }
    store.write_index(&index)?;
    Ok(IngestSummary { programmes })
}

struct Corpus {
    index: Vec<IndexEntry>,
    records: Vec<IngestRecord>,
}

impl Corpus {
    fn load(store: &Store) -> Result<Self> {
        let index = store.require_index()?;
        let records = index
            .iter()
            .map(|e| store.read_record(&e.id).with_context(|| format!("programme {}", e.id)))
            .collect::<Result<_>>()?;
        Ok(Corpus { index, records })
    }

    fn ids(&self) -> Vec<String> {
        self.index.iter().map(|e| e.id.clone()).collect()
    }

    fn docs(&self) -> Vec<TokenizedDoc> {
        self.records
            .iter()
            .map(|r| TokenizedDoc {
                programme_id: r.id.clone(),
                tokens: r.tokens.clone(),
            })
            .collect()
    }

    fn features(&self, store: &Store) -> Result<Vec<FrameFeatureMatrix>> {
        self.index
            .iter()
            .map(|e| {
                let a = mmsim_core::artifact::Artifact::load(&store.features_path(&e.id))
                    .with_context(|| format!("programme {}", e.id))?;
                Ok(FrameFeatureMatrix::from_artifact(&a)?)
            })
            .collect()
    }
}

fn modality_key(corpus: &Corpus, m: Modality, config: &PipelineConfig) -> Result<String> {
    let mut k = KeyBuilder::new(VECTOR_DOMAIN);
    k.part(m.label().as_bytes());
    for e in &corpus.index {
        k.part(e.id.as_bytes()).part(e.key.as_bytes());
    }
    match m {
        Modality::Lsi => k.json(&config.lsi)?,
        Modality::D2v => k.json(&config.pvdm)?,
        Modality::Aud => k.json(&config.audio)?,
        Modality::Md => k.json(&config.metadata)?,
    };
    Ok(k.finish())
}

/// Fits the requested modalities and writes models and programme vectors.
/// Returns the modalities that were recomputed.
pub fn cmd_vectorize(config: &PipelineConfig, modalities: &[Modality]) -> Result<Vec<Modality>> {
    let stochastic = modalities.iter().any(|m| *m != Modality::Md);
    if stochastic && config.seed.is_none() {
        return Err(
            UsageError("config has no seed; LSI, D2V and AUD need one (set \"seed\" or pass --seed)".into()).into(),
        );
    }
    let store = Store::new(&config.output_dir);
    let corpus = Corpus::load(&store)?;
    store.dir("vectors")?;
    store.dir("models")?;

    let mut computed = Vec::new();
    for &m in modalities {
        let key = modality_key(&corpus, m, config)?;
        let path = store.vectors_path(m.label());
        if stored_vector_key(&path).as_deref() == Some(key.as_str()) {
            info!("skipped {m} vectors (cached)");
            continue;
        }
        let vectors = match m {
            Modality::Lsi => {
                let (model, v) = lsi_vectors(&corpus.docs(), &config.lsi)?;
                model.to_artifact().save(&store.model_path("lsi.model"))?;
                v
            }
            Modality::D2v => {
                let (model, v) = d2v_vectors(&corpus.docs(), &config.pvdm)?;
                model.to_artifact().save(&store.model_path("pvdm.model"))?;
                v
            }
            Modality::Aud => {
                let (codebook, v) = audio_vectors(&corpus.features(&store)?, &config.audio)?;
                codebook.to_artifact().save(&store.model_path("codebook.model"))?;
                v
            }
            Modality::Md => {
                let genres = corpus
                    .records
                    .iter()
                    .map(|r| r.genres.iter().map(|g| parse_genre_path(g)).collect())
                    .collect::<mmsim_core::Result<Vec<Vec<_>>>>()?;
                let (space, v) = metadata_vectors(&corpus.ids(), &genres, &config.metadata.level_weights)?;
                write_atomic(
                    &store.model_path("attributes.json"),
                    &serde_json::to_vec_pretty(&space)?,
                )?;
                v
            }
        };
        save_vectors(&path, &vectors, &key)?;
        info!("wrote {m} vectors ({} x {})", vectors.ids.len(), vectors.dim());
        computed.push(m);
    }
    Ok(computed)
}

fn load_modality_vectors(store: &Store, m: Modality) -> Result<ModalityVectors> {
    let path = store.vectors_path(m.label());
    if !path.exists() {
        return Err(DataError(format!(
            "modality {m} has no vectors at {}; run `mmsim vectorize --modalities {m}`",
            path.display()
        ))
        .into());
    }
    Ok(load_vectors(&path)?.0)
}

/// Writes one similarity matrix per modality and the late-fused matrix.
pub fn cmd_fuse(config: &PipelineConfig, modalities: &[Modality]) -> Result<Vec<SimilarityMatrix>> {
    let store = Store::new(&config.output_dir);
    store.dir("similarity")?;
    let sets: Vec<ModalityVectors> = modalities
        .iter()
        .map(|&m| load_modality_vectors(&store, m))
        .collect::<Result<_>>()?;
    let mut matrices = Vec::with_capacity(sets.len() + 2);
    for set in &sets {
        let s = set.similarity()?;
        s.save(&store.similarity_path(&s.label))?;
        matrices.push(s);
    }
    let fused = late_fuse(&matrices, &config.fusion.weights)?;
    fused.save(&store.similarity_path(FUSED_LABEL))?;
    info!(
        "wrote {} modality matrices and {FUSED_LABEL} with weights {}",
        matrices.len(),
        serde_json::to_string(&config.fusion.weights)?
    );
    matrices.push(fused);
    if config.fusion.middle {
        let mid = middle_fuse(&sets, config.fusion.block_weights.as_deref())?.similarity()?;
        mid.save(&store.similarity_path(MIDDLE_LABEL))?;
        matrices.push(mid);
    }
    Ok(matrices)
}

fn load_relevance(config: &PipelineConfig, ids: &[String]) -> Result<(RelevanceSets, Option<SimilarityMatrix>)> {
    match &config.evaluation.relevance {
        None => Err(UsageError(
            "no relevance source configured; set evaluation.relevance to {\"file\": \"relevance.json\"} \
             or {\"user_matrix\": \"user.simm\"}"
                .into(),
        )
        .into()),
        Some(RelevanceSource::File(path)) => Ok((RelevanceSets::load(path, ids)?, None)),
        Some(RelevanceSource::UserMatrix(path)) => {
            let user = SimilarityMatrix::load(path)?.with_label("USER");
            if user.ids() != ids {
                return Err(DataError(format!(
                    "user matrix {} does not list the corpus programmes in corpus order",
                    path.display()
                ))
                .into());
            }
            Ok((derive_relevance(&user, config.evaluation.m)?, Some(user)))
        }
    }
}

fn evaluation_inputs(
    config: &PipelineConfig,
    store: &Store,
    modalities: &[Modality],
) -> Result<(
    Vec<SimilarityMatrix>,
    RelevanceSets,
    Option<SimilarityMatrix>,
    SimilarityMatrix,
)> {
    let matrices: Vec<SimilarityMatrix> = modalities
        .iter()
        .map(|m| store.load_similarity(m.label()))
        .collect::<Result<_>>()?;
    let ids = matrices[0].ids().to_vec();
    let (relevance, user) = load_relevance(config, &ids)?;
    let diversity = store
        .load_similarity(&config.evaluation.diversity)
        .with_context(|| format!("ILD diversity source {}", config.evaluation.diversity))?;
    Ok((matrices, relevance, user, diversity))
}

/// Evaluates the modality matrices, FUS (and MID when present) and writes
/// `reports/eval.json` and `reports/eval.txt`.
pub fn cmd_evaluate(config: &PipelineConfig, modalities: &[Modality]) -> Result<EvalReport> {
    let store = Store::new(&config.output_dir);
    let (mut models, relevance, user, diversity) = evaluation_inputs(config, &store, modalities)?;
    models.push(store.load_similarity(FUSED_LABEL)?);
    if store.similarity_path(MIDDLE_LABEL).exists() {
        models.push(store.load_similarity(MIDDLE_LABEL)?);
    }
    if let Some(user) = user {
        models.insert(0, user);
    }
    let mut report = evaluate(&models, &relevance, &diversity, &config.evaluation.cutoffs)?;
    report.config.weights = Some(config.fusion.weights.as_map().clone());
    report.config.seed = config.seed;
    store.dir("reports")?;
    write_atomic(&store.report_path("eval.json"), &serde_json::to_vec_pretty(&report)?)?;
    write_atomic(&store.report_path("eval.txt"), report.to_table().as_bytes())?;
    Ok(report)
}

/// Grid search over late-fusion weights; writes the sweep as CSV.
pub fn cmd_search_weights(config: &PipelineConfig, modalities: &[Modality]) -> Result<GridSearchOutcome> {
    let store = Store::new(&config.output_dir);
    let (matrices, relevance, _, diversity) = evaluation_inputs(config, &store, modalities)?;
    let mut outcome = grid_search_weights(
        &matrices,
        &relevance,
        &diversity,
        &config.evaluation.grid,
        config.evaluation.objective_k,
        &config.evaluation.cutoffs,
    )?;
    outcome.report.config.seed = config.seed;
    store.dir("reports")?;
    let mut csv = Vec::new();
    outcome.write_sweep_csv(&mut csv)?;
    write_atomic(&store.report_path("sweep.csv"), &csv)?;
    let summary = serde_json::json!({ "best": outcome.best, "report": outcome.report });
    write_atomic(&store.report_path("search.json"), &serde_json::to_vec_pretty(&summary)?)?;
    Ok(outcome)
}

/// Nearest neighbours of `programme` under one matrix or, for `ALL`, every
/// modality plus FUS side by side.
pub fn cmd_inspect(config: &PipelineConfig, programme: &str, modality: &str, top_n: usize) -> Result<String> {
    let store = Store::new(&config.output_dir);
    let labels: Vec<String> = match modality.to_ascii_uppercase().as_str() {
        "ALL" => Modality::ALL
            .iter()
            .map(|m| m.label().to_string())
            .chain([FUSED_LABEL.to_string()])
            .collect(),
        l @ (FUSED_LABEL | MIDDLE_LABEL) => vec![l.to_string()],
        other => vec![other.parse::<Modality>().map_err(UsageError)?.label().to_string()],
    };
    let mut columns = Vec::with_capacity(labels.len());
    for label in &labels {
        let s = store.load_similarity(label)?;
        let q = s
            .index_of(programme)
            .ok_or_else(|| DataError(format!("unknown programme id {programme:?}")))?;
        let n = top_n.min(s.n().saturating_sub(1));
        columns.push(rank_items(&s, q, n)?);
    }
    let cells: Vec<Vec<String>> = columns
        .iter()
        .map(|c| c.iter().map(|(id, score)| format!("{id} {score:.4}")).collect())
        .collect();
    let width = cells
        .iter()
        .flatten()
        .map(String::len)
        .chain(labels.iter().map(String::len))
        .max()
        .unwrap_or(0);
    let mut out = format!("neighbours of {programme}\n");
    let _ = write!(out, "{:>4}", "#");
    for l in &labels {
        let _ = write!(out, "  {l:<width$}");
    }
    out.push('\n');
    let rows = cells.iter().map(Vec::len).max().unwrap_or(0);
    for r in 0..rows {
        let _ = write!(out, "{:>4}", r + 1);
        for c in &cells {
            let _ = write!(out, "  {:<width$}", c.get(r).map_or("", String::as_str));
        }
        out.push('\n');
    }
    Ok(out)
}
