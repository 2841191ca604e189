use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use sparsemix_core::metrics::{
    parse_hypotheses, score_separation, wer, EvalRecord, GenderPairing, WerResult,
};
use sparsemix_core::signal::wav::read_wav;

use sparsemix_core::segperm::OUTPUT_TRACKS;

use super::separate::SeparationManifest;
use super::Outcome;
use crate::config::{write_run_config, RunConfig};
use crate::mixset::{track_name, MixtureSet};

pub const RESULTS_FILE: &str = "results.jsonl";

/// Scores separated tracks against the stems, and ASR hypotheses against
/// the reference transcripts.
#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub mixtures: PathBuf,
    /// Output directory of `separate`.
    #[arg(long)]
    pub tracks: PathBuf,
    /// Lines of `<mixture>_track<N>`, a tab, then the hypothesis words.
    #[arg(long)]
    pub hypotheses: Option<PathBuf>,
    /// Directory receiving `results.jsonl`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &EvaluateArgs, cfg: &mut RunConfig) -> Result<Outcome> {
    let set = MixtureSet::open(&args.mixtures)?;
    let sep = SeparationManifest::read(&args.tracks)?;
    let hyps = match &args.hypotheses {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(parse_hypotheses(&text).map_err(|e| anyhow!("{}: {e}", p.display()))?)
        }
        None => None,
    };
    if let Some(h) = &hyps {
        let known: BTreeSet<String> = set
            .records
            .iter()
            .flat_map(|r| (0..OUTPUT_TRACKS).map(|t| track_name(&r.mixture_id, t)))
            .collect();
        let unmatched: Vec<&String> = h.keys().filter(|k| !known.contains(*k)).collect();
        if !unmatched.is_empty() {
            bail!("hypothesis ids not matching any track: {unmatched:?}");
        }
    }
    let records = set
        .records
        .par_iter()
        .map(|r| -> Result<EvalRecord> {
            let m = set.load(r)?;
            let tracks = (0..OUTPUT_TRACKS)
                .map(|t| {
                    let p = args
                        .tracks
                        .join("tracks")
                        .join(format!("{}.wav", track_name(&r.mixture_id, t)));
                    read_wav(&p).with_context(|| format!("reading track {}", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            let score = score_separation(&m.stems, &tracks, &m.mixture)
                .with_context(|| format!("scoring {}", r.mixture_id))?;
            let wer_total = hyps.as_ref().and_then(|h| score_wer(h, r, &score.pairing));
            Ok(EvalRecord {
                mixture_id: r.mixture_id.clone(),
                condition: sep.condition,
                gender_pairing: GenderPairing::of(r.speaker_a.gender, r.speaker_b.gender),
                achieved_overlap: r.achieved_overlap,
                si_sdr_improvement_db: Some(score.mean_si_sdr_improvement()),
                sdr_improvement_db: Some(score.mean_sdr_improvement()),
                wer: wer_total,
                per_track: score.tracks,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let path = args.out.join(RESULTS_FILE);
    let mut f = std::io::BufWriter::new(
        fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    );
    for rec in &records {
        serde_json::to_writer(&mut f, rec)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    log::info!("wrote {} results to {}", records.len(), path.display());
    write_run_config(&args.out, "evaluate", args, cfg)?;
    Ok(Outcome::Complete)
}

/// Sums WER over the stems that have a reference transcript; a stem's
/// hypothesis is the one of the track it was paired with. `None` when no
/// stem has both.
fn score_wer(
    hyps: &BTreeMap<String, Vec<String>>,
    r: &sparsemix_core::mixture::MixtureRecord,
    pairing: &[usize],
) -> Option<WerResult> {
    let refs = [&r.speaker_a.transcript, &r.speaker_b.transcript];
    let mut total: Option<WerResult> = None;
    for (stem, reference) in refs.iter().enumerate() {
        let Some(reference) = reference else { continue };
        let empty = Vec::new();
        let hyp = hyps
            .get(&track_name(&r.mixture_id, pairing[stem]))
            .unwrap_or(&empty);
        let w = wer(reference, hyp);
        match &mut total {
            Some(t) => t.add(&w),
            None => total = Some(w),
        }
    }
    total
}
