use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sparsemix_core::embedding::{read_embeddings, EmbeddingTensor};
use sparsemix_core::metrics::Condition;
use sparsemix_core::mixture::MixtureRecord;
use sparsemix_core::pipeline::{self, Embeddings, MixtureInput, Mode};
use sparsemix_core::rng::derive_seed;
use sparsemix_core::segperm::{Assignment, ResolverKind, Segment};
use sparsemix_core::signal::wav::write_wav;

use super::Outcome;
use crate::config::{write_run_config, RunConfig};
use crate::mixset::{track_name, MixtureSet};

pub const SEPARATION_FILE: &str = "separation.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Full,
    Segmented,
    NoSeparation,
    Clean,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => Mode::Full,
            ModeArg::Segmented => Mode::Segmented,
            ModeArg::NoSeparation => Mode::NoSeparation,
            ModeArg::Clean => Mode::Clean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResolverArg {
    Oracle,
    Affinity,
    SpeakerId,
}

impl From<ResolverArg> for ResolverKind {
    fn from(r: ResolverArg) -> Self {
        match r {
            ResolverArg::Oracle => ResolverKind::Oracle,
            ResolverArg::Affinity => ResolverKind::Affinity,
            ResolverArg::SpeakerId => ResolverKind::SpeakerId,
        }
    }
}

/// Separates every mixture of a simulated set into two tracks.
#[derive(Debug, Args, Serialize)]
pub struct SeparateArgs {
    #[arg(long)]
    pub mixtures: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "segmented")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "oracle")]
    pub resolver: ResolverArg,
    /// `oracle`, or a directory of `<id>.emb` / `<id>.spkid.emb` files.
    #[arg(long, default_value = "oracle")]
    pub embeddings: String,
    /// Noise level of generated oracle embeddings.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Frames below this level (dB re. max) are left out of clustering.
    #[arg(long)]
    pub silence_db: Option<f64>,
}

/// Summary of a separation run, read back by `evaluate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparationManifest {
    pub mode: ModeArg,
    pub resolver: ResolverArg,
    pub condition: Condition,
    pub mixtures: Vec<String>,
}

impl SeparationManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(SEPARATION_FILE);
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Serialize)]
struct AssignmentFile<'a> {
    mixture_id: &'a str,
    segments: &'a [Segment],
    assignment: &'a Assignment,
}

enum Source {
    Oracle,
    Dir(PathBuf),
}

fn load_given(
    dir: &Path,
    id: &str,
    need_spkid: bool,
) -> Result<(EmbeddingTensor, Option<EmbeddingTensor>)> {
    let sep_path = dir.join(format!("{id}.emb"));
    let sep = read_embeddings(&sep_path)
        .with_context(|| format!("missing input: embedding file {}", sep_path.display()))?;
    let spk_path = dir.join(format!("{id}.spkid.emb"));
    let spk = if spk_path.exists() {
        Some(
            read_embeddings(&spk_path)
                .with_context(|| format!("reading {}", spk_path.display()))?,
        )
    } else if need_spkid {
        bail!(
            "missing input: speaker-Id embedding file {} (required by --resolver speaker-id)",
            spk_path.display()
        );
    } else {
        None
    };
    Ok((sep, spk))
}

fn separate_one(
    set: &MixtureSet,
    r: &MixtureRecord,
    args: &SeparateArgs,
    source: &Source,
    cfg: &RunConfig,
) -> Result<()> {
    let m = set.load(r)?;
    let mode: Mode = args.mode.into();
    let resolver: ResolverKind = args.resolver.into();
    let seed = derive_seed(cfg.seed, r.index as u64);
    let opts = cfg.pipeline(seed);
    let given;
    let embeddings = match source {
        Source::Oracle => Embeddings::Oracle {
            dim: cfg.embedding_dim,
            sigma: cfg.oracle_sigma,
            seed,
        },
        Source::Dir(dir) => {
            let need_spkid = mode == Mode::Segmented && resolver == ResolverKind::SpeakerId;
            given = load_given(dir, &r.mixture_id, need_spkid)?;
            Embeddings::Given {
                separation: &given.0,
                speaker_id: given.1.as_ref(),
            }
        }
    };
    let input = MixtureInput {
        mixture: &m.mixture,
        stems: &m.stems,
        activities: &m.activities,
    };
    let out = pipeline::run(&input, mode, resolver, &embeddings, &opts)
        .with_context(|| format!("separating {}", r.mixture_id))?;
    for (t, track) in out.tracks.iter().enumerate() {
        let path = args
            .out
            .join("tracks")
            .join(format!("{}.wav", track_name(&r.mixture_id, t)));
        write_wav(&path, track, cfg.track_format)?;
    }
    if let Some(a) = &out.assignment {
        if !a.flagged_segments.is_empty() {
            log::warn!(
                "{}: flagged segments {:?}",
                r.mixture_id,
                a.flagged_segments
            );
        }
        let file = AssignmentFile {
            mixture_id: &r.mixture_id,
            segments: &out.segments,
            assignment: a,
        };
        let path = args
            .out
            .join("assignments")
            .join(format!("{}.json", r.mixture_id));
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn run(args: &SeparateArgs, cfg: &mut RunConfig) -> Result<Outcome> {
    if let Some(s) = args.sigma {
        cfg.oracle_sigma = s;
    }
    if let Some(d) = args.dim {
        cfg.embedding_dim = d;
    }
    if args.silence_db.is_some() {
        cfg.silence_db = args.silence_db;
    }
    let source = if args.embeddings == "oracle" {
        Source::Oracle
    } else {
        Source::Dir(PathBuf::from(&args.embeddings))
    };
    let set = MixtureSet::open(&args.mixtures)?;
    for sub in ["tracks", "assignments"] {
        let d = args.out.join(sub);
        fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
    }
    log::info!(
        "separating {} mixtures, mode {:?}, resolver {:?}",
        set.records.len(),
        args.mode,
        args.resolver
    );
    set.records
        .par_iter()
        .map(|r| separate_one(&set, r, args, &source, cfg))
        .collect::<Result<Vec<()>>>()?;
    let manifest = SeparationManifest {
        mode: args.mode,
        resolver: args.resolver,
        condition: Mode::from(args.mode).condition(args.resolver.into()),
        mixtures: set.records.iter().map(|r| r.mixture_id.clone()).collect(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(args.out.join(SEPARATION_FILE), text)?;
    write_run_config(&args.out, "separate", args, cfg)?;
    Ok(Outcome::Complete)
}
