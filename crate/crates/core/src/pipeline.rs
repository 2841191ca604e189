//! One mixture through one processing condition: STFT, embeddings,
//! segmentation, separation and permutation resolution.

use serde::{Deserialize, Serialize};

use crate::embedding::{oracle_embeddings, EmbeddingTensor, DEFAULT_EMBEDDING_DIM};
use crate::error::{Error, Result};
use crate::metrics::Condition;
use crate::rng::derive_seed;
use crate::segperm::{
    oracle_segments, separate_full_sequence, separate_no_separation, separate_segmented,
    Assignment, ResolverInput, ResolverKind, Segment, SeparationOptions,
    DEFAULT_MIN_SEGMENT_FRAMES,
};
use crate::signal::{stft_with, ActivityTrack, AudioBuffer, StftParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Full,
    Segmented,
    NoSeparation,
    Clean,
}

impl Mode {
    pub fn condition(self, resolver: ResolverKind) -> Condition {
        match (self, resolver) {
            (Mode::Clean, _) => Condition::Clean,
            (Mode::NoSeparation, _) => Condition::NoSeparationOracleSegperm,
            (Mode::Full, _) => Condition::FullSequence,
            (Mode::Segmented, ResolverKind::Oracle) => Condition::SegmentedOracle,
            (Mode::Segmented, ResolverKind::Affinity) => Condition::SegmentedAffinity,
            (Mode::Segmented, ResolverKind::SpeakerId) => Condition::SegmentedSpeakerId,
        }
    }
}

/// Where the per-bin embeddings come from.
#[derive(Debug, Clone)]
pub enum Embeddings<'a> {
    /// Generated from the stems with i.i.d. Gaussian noise.
    Oracle { dim: usize, sigma: f64, seed: u64 },
    Given {
        separation: &'a EmbeddingTensor,
        speaker_id: Option<&'a EmbeddingTensor>,
    },
}

impl Default for Embeddings<'_> {
    fn default() -> Self {
        Embeddings::Oracle {
            dim: DEFAULT_EMBEDDING_DIM,
            sigma: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineOptions {
    pub stft: StftParams,
    pub separation: SeparationOptions,
    pub min_segment_frames: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            stft: StftParams::separation(),
            separation: SeparationOptions::default(),
            min_segment_frames: DEFAULT_MIN_SEGMENT_FRAMES,
        }
    }
}

pub struct MixtureInput<'a> {
    pub mixture: &'a AudioBuffer,
    pub stems: &'a [AudioBuffer; 2],
    pub activities: &'a [ActivityTrack; 2],
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub tracks: Vec<AudioBuffer>,
    pub segments: Vec<Segment>,
    pub assignment: Option<Assignment>,
}

/// Oracle separation and speaker-Id embeddings for one mixture. The
/// speaker-Id tensor uses an independent noise stream.
pub fn oracle_embedding_pair(
    stems: &[AudioBuffer; 2],
    params: &StftParams,
    dim: usize,
    sigma: f64,
    seed: u64,
) -> Result<(EmbeddingTensor, EmbeddingTensor)> {
    let specs = [
        stft_with(&stems[0], params, crate::Exec::Sequential)?,
        stft_with(&stems[1], params, crate::Exec::Sequential)?,
    ];
    Ok((
        oracle_embeddings(&specs, dim, sigma, derive_seed(seed, 0))?,
        oracle_embeddings(&specs, dim, sigma, derive_seed(seed, 1))?,
    ))
}

pub fn run(
    input: &MixtureInput<'_>,
    mode: Mode,
    resolver: ResolverKind,
    embeddings: &Embeddings<'_>,
    opts: &PipelineOptions,
) -> Result<PipelineOutput> {
    let out_len = input.mixture.len();
    if input.stems.iter().any(|s| s.len() != out_len)
        || input.activities.iter().any(|a| a.len() != out_len)
    {
        return Err(Error::LengthMismatch(
            "stems and activities must match the mixture length".into(),
        ));
    }
    if mode == Mode::Clean {
        return Ok(PipelineOutput {
            tracks: input.stems.to_vec(),
            segments: vec![],
            assignment: None,
        });
    }
    let exec = opts.separation.exec;
    let spec = stft_with(input.mixture, &opts.stft, exec)?;
    let sr = input.mixture.sample_rate();
    let segments = oracle_segments(
        &[&input.activities[0], &input.activities[1]],
        &opts.stft,
        sr,
        opts.min_segment_frames,
    );
    if mode == Mode::NoSeparation {
        let r = separate_no_separation(&spec, &segments, input.stems, out_len, exec)?;
        return Ok(PipelineOutput {
            tracks: r.tracks,
            segments,
            assignment: Some(r.assignment),
        });
    }

    let generated;
    let (sep, spk) = match embeddings {
        Embeddings::Oracle { dim, sigma, seed } => {
            generated = oracle_embedding_pair(input.stems, &opts.stft, *dim, *sigma, *seed)?;
            (&generated.0, Some(&generated.1))
        }
        Embeddings::Given {
            separation,
            speaker_id,
        } => (*separation, *speaker_id),
    };
    match mode {
        Mode::Full => {
            let r = separate_full_sequence(&spec, sep, &opts.separation, out_len)?;
            Ok(PipelineOutput {
                tracks: r.tracks,
                segments,
                assignment: None,
            })
        }
        Mode::Segmented => {
            let ri = match resolver {
                ResolverKind::Oracle => ResolverInput::Oracle { stems: input.stems },
                ResolverKind::Affinity => ResolverInput::Affinity,
                ResolverKind::SpeakerId => ResolverInput::SpeakerId {
                    embeddings: spk.ok_or(Error::MissingSpeakerId(0))?,
                },
            };
            let r = separate_segmented(&spec, sep, &segments, ri, &opts.separation, out_len)?;
            Ok(PipelineOutput {
                tracks: r.tracks,
                segments,
                assignment: Some(r.assignment),
            })
        }
        Mode::Clean | Mode::NoSeparation => unreachable!(),
    }
}
