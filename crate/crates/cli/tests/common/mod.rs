//! Small planted corpus and helpers for driving the `mmsim` binary.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLE_RATE: u32 = 22050;
const TONES: [f64; 3] = [220.0, 440.0, 880.0];
const GENRES: [&str; 3] = ["drama/crime", "comedy/sitcom", "factual/nature"];
const STEMS: [&str; 3] = ["harbour", "laugh", "forest"];

pub struct Workspace {
    pub dir: tempfile::TempDir,
    pub ids: Vec<String>,
}

impl Workspace {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn config(&self) -> PathBuf {
        self.path("config.json")
    }

    pub fn out(&self) -> PathBuf {
        self.path("out")
    }

    /// Rewrites the config, merging `extra` into the defaults used here.
    pub fn write_config(&self, extra: serde_json::Value) {
        let mut config = serde_json::json!({
            "manifest": "manifest.json",
            "output_dir": "out",
            "seed": 7,
            "pvdm": { "window": 2, "epochs": 30 },
            "audio": { "codebook": { "k": 8, "iterations": 60 } },
        });
        if let (Some(base), Some(extra)) = (config.as_object_mut(), extra.as_object()) {
            for (k, v) in extra {
                base.insert(k.clone(), v.clone());
            }
        }
        std::fs::write(self.config(), serde_json::to_vec_pretty(&config).unwrap()).unwrap();
    }

    /// Same-cluster relevance file for the planted corpus.
    pub fn write_relevance(&self) -> PathBuf {
        let per = self.ids.len() / 3;
        let map: BTreeMap<&String, Vec<&String>> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let mates = self
                    .ids
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i && j / per == i / per)
                    .map(|(_, o)| o)
                    .collect();
                (id, mates)
            })
            .collect();
        let path = self.path("relevance.json");
        std::fs::write(&path, serde_json::to_vec_pretty(&map).unwrap()).unwrap();
        path
    }

    pub fn mmsim(&self, args: &[&str]) -> Output {
        let config = self.config();
        Command::new(env!("CARGO_BIN_EXE_mmsim"))
            .arg("--config")
            .arg(&config)
            .args(args)
            .env("RUST_LOG", "info")
            .output()
            .expect("run mmsim")
    }
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn assert_ok(out: &Output) {
    assert!(out.status.success(), "mmsim failed: {}", stderr(out));
}

fn write_srt(path: &Path, tokens: &[String]) {
    let mut out = String::new();
    for (cue, chunk) in tokens.chunks(10).enumerate() {
        let s = cue * 3;
        let _ = writeln!(
            out,
            "{}\n00:00:{:02},000 --> 00:00:{:02},500",
            cue + 1,
            s % 60,
            (s + 2) % 60
        );
        let _ = writeln!(out, "{}\n", chunk.join(" "));
    }
    std::fs::write(path, out).unwrap();
}

fn write_wav(path: &Path, cluster: usize, rng: &mut ChaCha8Rng) {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    let len = SAMPLE_RATE as usize + rng.random_range(0..4000);
    for i in 0..len {
        let t = i as f64 / SAMPLE_RATE as f64;
        let mut x = 0.02 * (rng.random::<f64>() - 0.5);
        for (c, f) in TONES.iter().enumerate() {
            let amp = if c == cluster { 0.5 } else { 0.05 };
            x += amp * (2.0 * PI * f * t).sin();
        }
        w.write_sample((x * 32767.0) as i16).unwrap();
    }
    w.finalize().unwrap();
}

/// `per_cluster` programmes in each of three clusters, with cluster-specific
/// vocabulary, dominant tone and genre.
pub fn planted(per_cluster: usize) -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut entries = Vec::new();
    let mut ids = Vec::new();
    for i in 0..3 * per_cluster {
        let cluster = i / per_cluster;
        let id = format!("p{i:02}");
        let tokens: Vec<String> = (0..240)
            .map(|_| {
                if rng.random::<f64>() < 0.15 {
                    "the".to_string()
                } else {
                    format!("{}{}", STEMS[cluster], rng.random_range(0..10))
                }
            })
            .collect();
        write_srt(&dir.path().join(format!("{id}.srt")), &tokens);
        write_wav(&dir.path().join(format!("{id}.wav")), cluster, &mut rng);
        entries.push(serde_json::json!({
            "id": id,
            "subtitle_path": format!("{id}.srt"),
            "audio_path": format!("{id}.wav"),
            "genres": [GENRES[cluster]],
        }));
        ids.push(id);
    }
    std::fs::write(
        dir.path().join("manifest.json"),
        serde_json::to_vec_pretty(&serde_json::json!({ "programmes": entries })).unwrap(),
    )
    .unwrap();
    let ws = Workspace { dir, ids };
    ws.write_config(serde_json::json!({}));
    ws
}
