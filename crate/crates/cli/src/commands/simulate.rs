use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;
use sparsemix_core::mixture::{load_corpus, simulate_corpus, EnergyVad};
use sparsemix_core::signal::wav::WavFormat;
use sparsemix_core::Exec;

use super::Outcome;
use crate::config::{write_run_config, RunConfig};

/// Simulates sparsely overlapping mixtures from a corpus manifest.
#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Corpus manifest (JSON lines).
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overlap target; repeat for several.
    #[arg(long = "overlap")]
    pub overlaps: Vec<f64>,
    #[arg(long)]
    pub per_target: Option<usize>,
    #[arg(long)]
    pub snr_lo: Option<f64>,
    #[arg(long)]
    pub snr_hi: Option<f64>,
    #[arg(long)]
    pub max_no_speech: Option<f64>,
    #[arg(long)]
    pub min_gap_s: Option<f64>,
    #[arg(long, value_enum)]
    pub wav_format: Option<WavFormatArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WavFormatArg {
    Pcm16,
    Float32,
}

impl From<WavFormatArg> for WavFormat {
    fn from(v: WavFormatArg) -> Self {
        match v {
            WavFormatArg::Pcm16 => WavFormat::Pcm16,
            WavFormatArg::Float32 => WavFormat::Float32,
        }
    }
}

pub fn run(args: &SimulateArgs, cfg: &mut RunConfig) -> Result<Outcome> {
    let sim = &mut cfg.simulation;
    if !args.overlaps.is_empty() {
        sim.targets = args.overlaps.clone();
    }
    macro_rules! shadow {
        ($($field:ident),*) => { $( if let Some(v) = args.$field { sim.$field = v; } )* };
    }
    shadow!(per_target, snr_lo, snr_hi, max_no_speech, min_gap_s);
    if let Some(f) = args.wav_format {
        sim.wav_format = f.into();
    }
    let corpus = load_corpus(&args.manifest, EnergyVad::default())
        .with_context(|| format!("loading corpus {}", args.manifest.display()))?;
    log::info!(
        "simulating {} mixtures from {} utterances",
        sim.targets.len() * sim.per_target,
        corpus.utterances.len()
    );
    let summary = simulate_corpus(&corpus, sim, Some(&args.out), Exec::Parallel)?;
    write_run_config(&args.out, "simulate", args, cfg)?;
    log::info!(
        "emitted {} mixtures, skipped {}",
        summary.records.len(),
        summary.skipped.len()
    );
    if summary.skipped.is_empty() {
        Ok(Outcome::Complete)
    } else {
        for s in &summary.skipped {
            log::warn!("skipped mixture {}: {}", s.index, s.reason);
        }
        Ok(Outcome::Partial)
    }
}
