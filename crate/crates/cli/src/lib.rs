//! Staged command-line pipeline: ingest, vectorize, fuse, evaluate, inspect
//! and search-weights over one output directory.

mod commands;
pub mod config;
pub mod store;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_evaluate, cmd_fuse, cmd_ingest, cmd_inspect, cmd_search_weights, cmd_vectorize};
pub use config::PipelineConfig;

/// Bad invocation or configuration (exit code 1).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Input data is missing or invalid (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct DataError(pub String);

#[derive(Debug, Parser)]
#[command(name = "mmsim", version, about = "Multimodal programme similarity pipeline")]
pub struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run stochastic stages single-threaded for bitwise reproducibility.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Comma-separated subset of LSI, D2V, AUD, MD.
    #[arg(long, global = true, value_delimiter = ',')]
    pub modalities: Option<Vec<String>>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse subtitles, decode audio and extract frame features.
    Ingest,
    /// Fit per-modality models and write programme vectors.
    Vectorize,
    /// Build similarity matrices and the late-fused matrix.
    Fuse,
    /// Score every matrix with MAP@k and ILD@k.
    Evaluate,
    /// Print the nearest neighbours of one programme.
    Inspect {
        #[arg(long)]
        programme: String,
        /// LSI, D2V, AUD, MD, FUS, MID or ALL.
        #[arg(long, default_value = "ALL")]
        modality: String,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
    },
    /// Exhaustive search over late-fusion weights.
    SearchWeights,
}

/// Loads the config and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig, UsageError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| UsageError("--config PATH is required".into()))?;
    let mut config = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if cli.deterministic {
        config.pvdm.parallel = false;
    }
    config.propagate_seed();
    Ok(config)
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = resolve_config(&cli)?;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        // fails only if a pool already exists, e.g. when called twice in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let modalities = commands::parse_modalities(cli.modalities.as_deref())?;
    match cli.command {
        Command::Ingest => cmd_ingest(&config).map(|_| ()),
        Command::Vectorize => cmd_vectorize(&config, &modalities).map(|_| ()),
        Command::Fuse => cmd_fuse(&config, &modalities).map(|_| ()),
        Command::Evaluate => {
            let report = cmd_evaluate(&config, &modalities)?;
            print!("{}", report.to_table());
            Ok(())
        }
        Command::Inspect {
            programme,
            modality,
            top_n,
        } => {
            print!("{}", cmd_inspect(&config, &programme, &modality, top_n)?);
            Ok(())
        }
        Command::SearchWeights => {
            let outcome = cmd_search_weights(&config, &modalities)?;
            println!("best weights: {}", serde_json::to_string(&outcome.best)?);
            print!("{}", outcome.report.to_table());
            Ok(())
        }
    }
}

/// 1 usage/config, 2 data, 3 internal.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use mmsim_core::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<clap::Error>() {
            return 1;
        }
        if cause.is::<DataError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidHyperparameters(_)
                | E::UnknownModalityWeight(_)
                | E::AllZeroWeights
                | E::InvalidWeight { .. }
                | E::InvalidM { .. }
                | E::EmptyGrid(_) => 1,
                E::DimensionMismatch { .. } | E::ShapeMismatch(_) | E::IndexOutOfRange { .. } | E::NoModels => 3,
                _ => 2,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    3
}
