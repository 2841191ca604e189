use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::Serialize;
use sparsemix_core::mixture::synthetic::{write_toy_corpus, ToyCorpusSpec};

use super::Outcome;

/// Writes a synthetic harmonic-speaker corpus with a manifest.
#[derive(Debug, Args, Serialize)]
pub struct ToyArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub speakers: usize,
    #[arg(long, default_value_t = 3)]
    pub utterances: usize,
    /// Corpus generation seed (independent of the run seed).
    #[arg(long, default_value_t = 1)]
    pub corpus_seed: u64,
    /// Give every utterance the same length.
    #[arg(long)]
    pub equal_lengths: bool,
}

pub fn run(args: &ToyArgs) -> Result<Outcome> {
    let spec = ToyCorpusSpec {
        speakers: args.speakers,
        utterances_per_speaker: args.utterances,
        equal_lengths: args.equal_lengths,
        seed: args.corpus_seed,
        ..Default::default()
    };
    let manifest = write_toy_corpus(&args.out, &spec)?;
    log::info!("wrote toy corpus manifest {}", manifest.display());
    Ok(Outcome::Complete)
}
