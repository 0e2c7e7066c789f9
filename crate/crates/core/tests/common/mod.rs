//! Planted three-cluster corpus written to a temporary directory.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use mmsim_core::corpus::{load_manifest, SubtitleOptions, SAMPLE_RATE};
use mmsim_core::eval::{Provenance, RelevanceSets};
use mmsim_core::fusion::late_fuse;
use mmsim_core::pipeline::{
    audio_vectors, d2v_vectors, ingest_programme, lsi_vectors, metadata_vectors, AudioParams, LsiSettings,
};
use mmsim_core::textvec::PvdmParams;
use mmsim_core::{FusionWeights, SimilarityMatrix};

pub const PROGRAMMES: usize = 12;
pub const CLUSTERS: usize = 3;
pub const TONES: [f64; CLUSTERS] = [220.0, 440.0, 880.0];
pub const GENRES: [&str; CLUSTERS] = ["drama/crime", "comedy/sitcom", "factual/nature"];
const COMMON: [&str; 5] = ["the", "and", "then", "well", "here"];
const WORDS_PER_CLUSTER: usize = 12;

#[derive(Debug, Clone)]
pub struct PlantedSpec {
    pub seed: u64,
    pub tokens_per_doc: usize,
    pub seconds: f64,
    /// (programme, other cluster, fraction of its tokens drawn from it)
    pub text_mixture: Option<(usize, usize, f64)>,
    /// (programme, cluster whose tones it plays)
    pub audio_from: Option<(usize, usize)>,
    /// (programme, cluster whose genre it additionally carries)
    pub extra_genre: Option<(usize, usize)>,
}

impl PlantedSpec {
    pub fn clean(seed: u64) -> Self {
        PlantedSpec {
            seed,
            tokens_per_doc: 300,
            seconds: 2.0,
            text_mixture: None,
            audio_from: None,
            extra_genre: None,
        }
    }
}

pub struct PlantedCorpus {
    pub dir: tempfile::TempDir,
    pub manifest: PathBuf,
    pub ids: Vec<String>,
    pub clusters: Vec<usize>,
}

pub fn cluster_of(i: usize) -> usize {
    i / (PROGRAMMES / CLUSTERS)
}

fn word(cluster: usize, j: usize) -> String {
    format!("{}{j}", ["harbour", "laugh", "forest"][cluster])
}

fn write_srt(path: &Path, tokens: &[String]) {
    let mut out = String::new();
    for (cue, chunk) in tokens.chunks(10).enumerate() {
        let start = cue * 3;
        let _ = writeln!(out, "{}", cue + 1);
        let _ = writeln!(
            out,
            "00:{:02}:{:02},000 --> 00:{:02}:{:02},500",
            start / 60,
            start % 60,
            (start + 2) / 60,
            (start + 2) % 60
        );
        let _ = writeln!(out, "{}\n", chunk.join(" "));
    }
    std::fs::write(path, out).unwrap();
}

fn write_wav(path: &Path, cluster: usize, seconds: f64, rng: &mut ChaCha8Rng) {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    let noise = Normal::new(0.0, 0.01).unwrap();
    let phases: Vec<f64> = (0..CLUSTERS).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
    let len = (seconds * SAMPLE_RATE as f64) as usize;
    for i in 0..len {
        let t = i as f64 / SAMPLE_RATE as f64;
        let mut x = noise.sample(rng);
        for (c, &f) in TONES.iter().enumerate() {
            let amp = if c == cluster { 0.5 } else { 0.05 };
            x += amp * (2.0 * PI * f * t + phases[c]).sin();
        }
        w.write_sample((x.clamp(-1.0, 1.0) * 32767.0) as i16).unwrap();
    }
    w.finalize().unwrap();
}

pub fn write_planted(spec: &PlantedSpec) -> PlantedCorpus {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut entries = Vec::new();
    let mut ids = Vec::new();
    let mut clusters = Vec::new();
    for i in 0..PROGRAMMES {
        let cluster = cluster_of(i);
        let id = format!("p{i:02}");
        let tokens: Vec<String> = (0..spec.tokens_per_doc)
            .map(|_| {
                if rng.random::<f64>() < 0.15 {
                    return COMMON[rng.random_range(0..COMMON.len())].to_string();
                }
                let source = match spec.text_mixture {
                    Some((p, other, frac)) if p == i && rng.random::<f64>() < frac => other,
                    _ => cluster,
                };
                word(source, rng.random_range(0..WORDS_PER_CLUSTER))
            })
            .collect();
        write_srt(&dir.path().join(format!("{id}.srt")), &tokens);

        let audio_cluster = match spec.audio_from {
            Some((p, c)) if p == i => c,
            _ => cluster,
        };
        let seconds = spec.seconds * (0.9 + 0.2 * rng.random::<f64>());
        write_wav(&dir.path().join(format!("{id}.wav")), audio_cluster, seconds, &mut rng);

        let mut genres = vec![GENRES[cluster].to_string()];
        if let Some((p, c)) = spec.extra_genre {
            if p == i {
                genres.push(GENRES[c].to_string());
            }
        }
        entries.push(serde_json::json!({
            "id": id,
            "title": format!("Programme {i}"),
            "subtitle_path": format!("{id}.srt"),
            "audio_path": format!("{id}.wav"),
            "genres": genres,
        }));
        ids.push(id);
        clusters.push(cluster);
    }
    let manifest = dir.path().join("manifest.json");
    std::fs::write(
        &manifest,
        serde_json::to_vec_pretty(&serde_json::json!({ "programmes": entries })).unwrap(),
    )
    .unwrap();
    PlantedCorpus {
        dir,
        manifest,
        ids,
        clusters,
    }
}

pub fn same_cluster_relevance(corpus: &PlantedCorpus) -> RelevanceSets {
    let map: BTreeMap<String, Vec<String>> = corpus
        .ids
        .iter()
        .zip(&corpus.clusters)
        .map(|(id, c)| {
            let mates = corpus
                .ids
                .iter()
                .zip(&corpus.clusters)
                .filter(|(other, oc)| *oc == c && *other != id)
                .map(|(other, _)| other.clone())
                .collect();
            (id.clone(), mates)
        })
        .collect();
    RelevanceSets::from_map(&corpus.ids, &map, Provenance::File { path: "planted".into() }).unwrap()
}

/// LSI, D2V, AUD, MD and FUS matrices for the corpus, in that order.
pub fn run_pipeline(corpus: &PlantedCorpus, seed: u64, weights: &FusionWeights) -> Vec<SimilarityMatrix> {
    let manifest = load_manifest(&corpus.manifest).unwrap();
    let ingested: Vec<_> = manifest
        .entries
        .iter()
        .map(|e| ingest_programme(e, SubtitleOptions::default()).unwrap())
        .collect();
    let docs: Vec<_> = ingested.iter().map(|p| p.doc.clone()).collect();
    let features: Vec<_> = ingested.iter().map(|p| p.features.clone()).collect();
    let genres: Vec<_> = ingested.iter().map(|p| p.genres.clone()).collect();

    let mut lsi = LsiSettings::default();
    lsi.params.svd.seed = seed;
    // a narrow window keeps the doc vector informative on short synthetic text
    let pvdm = PvdmParams {
        seed,
        window: 2,
        ..Default::default()
    };
    let mut audio = AudioParams::default();
    audio.codebook.seed = seed;

    let sets = [
        lsi_vectors(&docs, &lsi).unwrap().1,
        d2v_vectors(&docs, &pvdm).unwrap().1,
        audio_vectors(&features, &audio).unwrap().1,
        metadata_vectors(&corpus.ids, &genres, &[]).unwrap().1,
    ];
    let mut matrices: Vec<SimilarityMatrix> = sets.iter().map(|s| s.similarity().unwrap()).collect();
    let fused = late_fuse(&matrices, weights).unwrap();
    matrices.push(fused);
    matrices
}
