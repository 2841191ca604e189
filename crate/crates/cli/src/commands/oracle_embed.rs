use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use sparsemix_core::embedding::write_embeddings;
use sparsemix_core::pipeline::oracle_embedding_pair;
use sparsemix_core::rng::derive_seed;

use super::Outcome;
use crate::config::{write_run_config, RunConfig};
use crate::mixset::MixtureSet;

/// Writes oracle separation (`<id>.emb`) and speaker-Id (`<id>.spkid.emb`)
/// embeddings for every mixture. They equal the ones `separate
/// --embeddings oracle` generates under the same config and seed.
#[derive(Debug, Args, Serialize)]
pub struct OracleEmbedArgs {
    #[arg(long)]
    pub mixtures: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Skip the speaker-Id tensors.
    #[arg(long)]
    pub no_speaker_id: bool,
}

pub fn run(args: &OracleEmbedArgs, cfg: &mut RunConfig) -> Result<Outcome> {
    if let Some(d) = args.dim {
        cfg.embedding_dim = d;
    }
    if let Some(s) = args.sigma {
        cfg.oracle_sigma = s;
    }
    let set = MixtureSet::open(&args.mixtures)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    set.records
        .par_iter()
        .map(|r| -> Result<()> {
            let m = set.load(r)?;
            let seed = derive_seed(cfg.seed, r.index as u64);
            let (sep, spk) = oracle_embedding_pair(
                &m.stems,
                &cfg.stft,
                cfg.embedding_dim,
                cfg.oracle_sigma,
                seed,
            )
            .with_context(|| format!("embedding {}", r.mixture_id))?;
            write_embeddings(&sep, args.out.join(format!("{}.emb", r.mixture_id)))?;
            if !args.no_speaker_id {
                write_embeddings(&spk, args.out.join(format!("{}.spkid.emb", r.mixture_id)))?;
            }
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;
    log::info!("wrote oracle embeddings for {} mixtures", set.records.len());
    write_run_config(&args.out, "oracle-embed", args, cfg)?;
    Ok(Outcome::Complete)
}
