use super::resolve::{
    resolve_affinity, resolve_oracle, resolve_speaker_id, AffinityOptions, Assignment,
};
use super::{validate_segments, Segment, SegmentKind};
use crate::embedding::{
    apply_masks, kmeans_embed_masked, masks_from_labels, silence_bins, ClusterResult,
    EmbeddingTensor, KMeansOptions, Mask,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::signal::{AudioBuffer, Spectrogram};

/// Segmented mode always produces this many speaker tracks.
pub const OUTPUT_TRACKS: usize = 2;

#[derive(Debug, Clone, Copy)]
pub struct SeparationOptions {
    /// Speakers per multi-speaker clustering problem.
    pub k: usize,
    pub kmeans: KMeansOptions,
    /// Leave bins this many dB under the loudest bin out of clustering.
    pub silence_db: Option<f64>,
    pub affinity: AffinityOptions,
    pub exec: Exec,
}

impl Default for SeparationOptions {
    fn default() -> Self {
        SeparationOptions {
            k: 2,
            kmeans: KMeansOptions::default(),
            silence_db: None,
            affinity: AffinityOptions::default(),
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FullSequenceResult {
    pub tracks: Vec<AudioBuffer>,
    pub clusters: ClusterResult,
    pub mask: Mask,
}

fn include_mask(
    spec: &Spectrogram,
    frames: std::ops::Range<usize>,
    silence_db: Option<f64>,
) -> Option<Vec<bool>> {
    let db = silence_db?;
    let quiet = silence_bins(spec, db);
    let f = spec.freqs();
    Some(
        quiet[frames.start * f..frames.end * f]
            .iter()
            .map(|q| !q)
            .collect(),
    )
}

/// Clusters all bins of the mixture at once and masks the whole sequence.
pub fn separate_full_sequence(
    mix_spec: &Spectrogram,
    emb: &EmbeddingTensor,
    opts: &SeparationOptions,
    out_len: usize,
) -> Result<FullSequenceResult> {
    emb.check_matches(mix_spec)?;
    let frames = 0..mix_spec.frames();
    let include = include_mask(mix_spec, frames.clone(), opts.silence_db);
    let clusters =
        kmeans_embed_masked(emb, opts.k, Some(frames), include.as_deref(), &opts.kmeans)?;
    let mask = masks_from_labels(&clusters)?;
    let tracks = apply_masks(mix_spec, &mask, out_len, opts.exec)?;
    Ok(FullSequenceResult {
        tracks,
        clusters,
        mask,
    })
}

/// What a segment contributes before permutation resolution.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalTracks {
    /// Clustered multi-speaker segment; local speaker `j` owns the bins
    /// labelled `j`.
    Masked(Mask),
    /// The mixture region as the single local speaker.
    Copy,
    /// The mixture region as every local speaker (no separation).
    Duplicate(usize),
    /// No output.
    Silent,
}

#[derive(Debug, Clone)]
pub struct SegmentOutput {
    pub index: usize,
    pub segment: Segment,
    pub tracks: LocalTracks,
    /// Mean separation embedding per local speaker.
    pub means: Option<Vec<Vec<f64>>>,
    pub speaker_id_means: Option<Vec<Vec<f64>>>,
}

impl SegmentOutput {
    pub fn n_local(&self) -> usize {
        match &self.tracks {
            LocalTracks::Masked(m) => m.k(),
            LocalTracks::Copy => 1,
            LocalTracks::Duplicate(k) => *k,
            LocalTracks::Silent => 0,
        }
    }

    /// Whether local speaker `j` keeps bin `(t, f)` of the region.
    fn keeps(&self, j: usize, t: usize, f: usize) -> bool {
        match &self.tracks {
            LocalTracks::Masked(m) => m.owner_at(t, f) == j,
            LocalTracks::Copy | LocalTracks::Duplicate(_) => true,
            LocalTracks::Silent => false,
        }
    }

    /// Writes local speaker `j`'s bins of `mix` into `out`.
    pub fn write_local(&self, mix: &Spectrogram, j: usize, out: &mut Spectrogram) {
        for t in self.segment.frames() {
            let src = mix.frame(t);
            let dst = out.frame_mut(t);
            for f in 0..src.len() {
                if self.keeps(j, t, f) {
                    dst[f] = src[f];
                }
            }
        }
    }

    /// Local speaker `j` resynthesised from this segment's frames alone.
    pub fn local_waveform(
        &self,
        mix: &Spectrogram,
        j: usize,
        out_len: usize,
    ) -> Result<AudioBuffer> {
        let mut s = Spectrogram::zeros(mix.frames(), *mix.params(), mix.sample_rate());
        self.write_local(mix, j, &mut s);
        s.istft_frames(self.segment.frames(), out_len)
    }
}

/// Means of `emb` over each local speaker's bins. Speakers without bins
/// fall back to the mean over the whole segment.
fn local_means(emb: &EmbeddingTensor, out: &SegmentOutput) -> Vec<Vec<f64>> {
    let d = emb.dim();
    let n_local = out.n_local();
    let mut sums = vec![vec![0.0; d]; n_local];
    let mut counts = vec![0usize; n_local];
    let mut all = vec![0.0; d];
    let mut n_all = 0usize;
    for t in out.segment.frames() {
        for f in 0..emb.freqs() {
            let v = emb.vector(t, f);
            for (a, x) in all.iter_mut().zip(v) {
                *a += *x as f64;
            }
            n_all += 1;
            for j in 0..n_local {
                if out.keeps(j, t, f) {
                    for (a, x) in sums[j].iter_mut().zip(v) {
                        *a += *x as f64;
                    }
                    counts[j] += 1;
                }
            }
        }
    }
    (0..n_local)
        .map(|j| {
            let (s, n) = if counts[j] > 0 {
                (&sums[j], counts[j])
            } else {
                (&all, n_all.max(1))
            };
            s.iter().map(|x| x / n as f64).collect()
        })
        .collect()
}

/// Clusters every multi segment on its own bins (the `i`-th multi segment
/// uses seed `seed + i`) and records per-speaker mean embeddings.
pub fn segment_outputs(
    mix_spec: &Spectrogram,
    emb: Option<&EmbeddingTensor>,
    speaker_id: Option<&EmbeddingTensor>,
    segments: &[Segment],
    opts: &SeparationOptions,
) -> Result<Vec<SegmentOutput>> {
    validate_segments(segments, mix_spec.frames())?;
    for e in emb.iter().chain(speaker_id.iter()) {
        e.check_matches(mix_spec)?;
    }
    let mut multi_rank = Vec::with_capacity(segments.len());
    let mut next = 0u64;
    for s in segments {
        multi_rank.push(next);
        if s.kind == SegmentKind::Multi {
            next += 1;
        }
    }
    // Segments are independent; inner clustering stays sequential when the
    // segments themselves run in parallel.
    let inner = if opts.exec.is_parallel() && segments.len() > 1 {
        Exec::Sequential
    } else {
        opts.exec
    };
    let results = opts.exec.map(segments.len(), |i| -> Result<SegmentOutput> {
        let segment = segments[i].clone();
        let tracks = match segment.kind {
            SegmentKind::Multi => {
                let e = emb.ok_or(Error::MissingEmbeddings(i))?;
                let kopts = KMeansOptions {
                    seed: opts.kmeans.seed.wrapping_add(multi_rank[i]),
                    exec: inner,
                    ..opts.kmeans
                };
                let include = include_mask(mix_spec, segment.frames(), opts.silence_db);
                let c = kmeans_embed_masked(
                    e,
                    opts.k,
                    Some(segment.frames()),
                    include.as_deref(),
                    &kopts,
                )?;
                LocalTracks::Masked(masks_from_labels(&c)?)
            }
            SegmentKind::Single => LocalTracks::Copy,
            SegmentKind::None => LocalTracks::Silent,
        };
        let mut out = SegmentOutput {
            index: i,
            segment,
            tracks,
            means: None,
            speaker_id_means: None,
        };
        out.means = emb.map(|e| local_means(e, &out));
        out.speaker_id_means = speaker_id.map(|e| local_means(e, &out));
        Ok(out)
    });
    results.into_iter().collect()
}

/// Second input a resolver needs besides the segment outputs.
#[derive(Debug, Clone, Copy)]
pub enum ResolverInput<'a> {
    Oracle { stems: &'a [AudioBuffer] },
    Affinity,
    SpeakerId { embeddings: &'a EmbeddingTensor },
}

#[derive(Debug, Clone)]
pub struct SegmentedResult {
    pub tracks: Vec<AudioBuffer>,
    pub assignment: Assignment,
    pub outputs: Vec<SegmentOutput>,
}

/// Clusters multi-speaker segments locally, passes single-speaker segments
/// through and stitches everything into two tracks.
pub fn separate_segmented(
    mix_spec: &Spectrogram,
    emb: &EmbeddingTensor,
    segments: &[Segment],
    resolver: ResolverInput<'_>,
    opts: &SeparationOptions,
    out_len: usize,
) -> Result<SegmentedResult> {
    let spk = match resolver {
        ResolverInput::SpeakerId { embeddings } => Some(embeddings),
        _ => None,
    };
    let outputs = segment_outputs(mix_spec, Some(emb), spk, segments, opts)?;
    let assignment = match resolver {
        ResolverInput::Oracle { stems } => resolve_oracle(mix_spec, &outputs, stems, out_len)?,
        ResolverInput::Affinity => resolve_affinity(&outputs, &opts.affinity)?,
        ResolverInput::SpeakerId { .. } => resolve_speaker_id(&outputs, &opts.affinity)?,
    };
    let tracks = stitch_tracks(mix_spec, &outputs, &assignment, out_len, opts.exec)?;
    Ok(SegmentedResult {
        tracks,
        assignment,
        outputs,
    })
}

/// Reference condition without masking: multi-speaker regions go to both
/// tracks unchanged, single-speaker regions are routed by correlation with
/// the stems.
pub fn separate_no_separation(
    mix_spec: &Spectrogram,
    segments: &[Segment],
    stems: &[AudioBuffer],
    out_len: usize,
    exec: Exec,
) -> Result<SegmentedResult> {
    validate_segments(segments, mix_spec.frames())?;
    let outputs: Vec<SegmentOutput> = segments
        .iter()
        .enumerate()
        .map(|(i, s)| SegmentOutput {
            index: i,
            segment: s.clone(),
            tracks: match s.kind {
                SegmentKind::Multi => LocalTracks::Duplicate(OUTPUT_TRACKS),
                SegmentKind::Single => LocalTracks::Copy,
                SegmentKind::None => LocalTracks::Silent,
            },
            means: None,
            speaker_id_means: None,
        })
        .collect();
    let assignment = resolve_oracle(mix_spec, &outputs, stems, out_len)?;
    let tracks = stitch_tracks(mix_spec, &outputs, &assignment, out_len, exec)?;
    Ok(SegmentedResult {
        tracks,
        assignment,
        outputs,
    })
}

/// Assembles one full-size spectrogram per track from the assigned segment
/// regions and resynthesises each with a single ISTFT.
pub fn stitch_tracks(
    mix_spec: &Spectrogram,
    outputs: &[SegmentOutput],
    assignment: &Assignment,
    out_len: usize,
    exec: Exec,
) -> Result<Vec<AudioBuffer>> {
    assignment.check(outputs)?;
    let mut specs: Vec<Spectrogram> = (0..OUTPUT_TRACKS)
        .map(|_| {
            Spectrogram::zeros(
                mix_spec.frames(),
                *mix_spec.params(),
                mix_spec.sample_rate(),
            )
        })
        .collect();
    for (out, sa) in outputs.iter().zip(&assignment.segments) {
        for (j, &track) in sa.mapping.iter().enumerate() {
            out.write_local(mix_spec, j, &mut specs[track]);
        }
    }
    specs
        .iter()
        .map(|s| s.istft_frames_with(0..s.frames(), out_len, exec))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{ideal_binary_mask, oracle_embeddings};
    use crate::segperm::ResolverKind;
    use crate::signal::{stft, StftParams};

    fn tone(freq: f64, len: usize, on: std::ops::Range<usize>) -> AudioBuffer {
        let v = (0..len)
            .map(|i| {
                if on.contains(&i) {
                    0.3 * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin()
                } else {
                    0.0
                }
            })
            .collect();
        AudioBuffer::new(v, 16000).unwrap()
    }

    fn setup() -> (Vec<AudioBuffer>, AudioBuffer, Spectrogram, Vec<Spectrogram>) {
        let len = 16000;
        let a = tone(500.0, len, 0..11000);
        let b = tone(2500.0, len, 5000..16000);
        let mix = AudioBuffer::new(
            a.samples()
                .iter()
                .zip(b.samples())
                .map(|(x, y)| x + y)
                .collect(),
            16000,
        )
        .unwrap();
        let p = StftParams::separation();
        let ms = stft(&mix, &p).unwrap();
        let stems = vec![stft(&a, &p).unwrap(), stft(&b, &p).unwrap()];
        (vec![a, b], mix, ms, stems)
    }

    #[test]
    fn one_covering_segment_equals_full_sequence() {
        let (_, mix, ms, stems) = setup();
        let emb = oracle_embeddings(&stems, 40, 0.2, 3).unwrap();
        let opts = SeparationOptions::default();
        let full = separate_full_sequence(&ms, &emb, &opts, mix.len()).unwrap();
        let seg = Segment {
            start_frame: 0,
            end_frame: ms.frames(),
            kind: SegmentKind::Multi,
            active: vec![0, 1],
        };
        let s = separate_segmented(&ms, &emb, &[seg], ResolverInput::Affinity, &opts, mix.len())
            .unwrap();
        assert_eq!(full.tracks, s.tracks);
        assert_eq!(s.assignment.method, ResolverKind::Affinity);
    }

    #[test]
    fn noiseless_full_sequence_reproduces_ibm() {
        let (_, mix, ms, stems) = setup();
        let emb = oracle_embeddings(&stems, 40, 0.0, 0).unwrap();
        let full =
            separate_full_sequence(&ms, &emb, &SeparationOptions::default(), mix.len()).unwrap();
        let ibm = ideal_binary_mask(&stems).unwrap();
        let direct = full.mask == ibm || full.mask.permuted(&[1, 0]) == ibm;
        assert!(direct);
    }

    #[test]
    fn swapping_assignment_swaps_tracks() {
        let (stems_t, mix, ms, stems) = setup();
        let emb = oracle_embeddings(&stems, 40, 0.1, 1).unwrap();
        let segs = vec![
            Segment {
                start_frame: 0,
                end_frame: 40,
                kind: SegmentKind::Single,
                active: vec![0],
            },
            Segment {
                start_frame: 40,
                end_frame: 100,
                kind: SegmentKind::Multi,
                active: vec![0, 1],
            },
            Segment {
                start_frame: 100,
                end_frame: ms.frames(),
                kind: SegmentKind::Single,
                active: vec![1],
            },
        ];
        let opts = SeparationOptions::default();
        let r = separate_segmented(
            &ms,
            &emb,
            &segs,
            ResolverInput::Oracle { stems: &stems_t },
            &opts,
            mix.len(),
        )
        .unwrap();
        let swapped = r.assignment.swapped();
        let t2 = stitch_tracks(&ms, &r.outputs, &swapped, mix.len(), Exec::Sequential).unwrap();
        assert_eq!(t2[0], r.tracks[1]);
        assert_eq!(t2[1], r.tracks[0]);
        let mut bad = r.assignment.clone();
        bad.segments.pop();
        assert!(matches!(
            stitch_tracks(&ms, &r.outputs, &bad, mix.len(), Exec::Sequential),
            Err(Error::Unassigned(2))
        ));
    }

    #[test]
    fn missing_embeddings_for_multi() {
        let (_, _, ms, _) = setup();
        let segs = vec![Segment {
            start_frame: 0,
            end_frame: ms.frames(),
            kind: SegmentKind::Multi,
            active: vec![],
        }];
        assert!(matches!(
            segment_outputs(&ms, None, None, &segs, &SeparationOptions::default()),
            Err(Error::MissingEmbeddings(0))
        ));
    }
}
