//! Permutation resolvers. Each maps the local speakers of every segment
//! onto the two output tracks.

use serde::{Deserialize, Serialize};

use super::separate::{LocalTracks, SegmentOutput, OUTPUT_TRACKS};
use super::SegmentKind;
use crate::error::{Error, Result};
use crate::signal::{AudioBuffer, Spectrogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolverKind {
    Oracle,
    Affinity,
    SpeakerId,
}

/// How a group of per-segment mean vectors on one track is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupScore {
    /// Mean pairwise Euclidean distance; a single vector scores 0.
    #[default]
    MeanPairwise,
    /// Mean distance to the group centroid.
    Centroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AffinityOptions {
    pub score: GroupScore,
    /// Above this many multi segments the joint search turns greedy.
    pub exhaustive_limit: usize,
    /// Force the greedy search regardless of the segment count.
    pub force_greedy: bool,
}

impl Default for AffinityOptions {
    fn default() -> Self {
        AffinityOptions {
            score: GroupScore::MeanPairwise,
            exhaustive_limit: 20,
            force_greedy: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentAssignment {
    pub segment_index: usize,
    /// `mapping[j]` is the output track of local speaker `j`.
    pub mapping: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub method: ResolverKind,
    pub segments: Vec<SegmentAssignment>,
    pub fallback_used: bool,
    /// Segments whose assignment was a default rather than a decision.
    #[serde(default)]
    pub flagged_segments: Vec<usize>,
}

impl Assignment {
    /// The same assignment with the two output tracks exchanged.
    pub fn swapped(&self) -> Assignment {
        let mut a = self.clone();
        for s in &mut a.segments {
            for t in &mut s.mapping {
                *t = 1 - *t;
            }
        }
        a
    }

    /// Equal mappings, possibly after exchanging the two tracks.
    pub fn same_up_to_swap(&self, other: &Assignment) -> bool {
        let maps = |a: &Assignment| {
            a.segments
                .iter()
                .map(|s| s.mapping.clone())
                .collect::<Vec<_>>()
        };
        let mine = maps(self);
        mine == maps(other) || mine == maps(&other.swapped())
    }

    /// Every segment is mapped; multi-speaker mappings are bijections.
    pub fn check(&self, outputs: &[SegmentOutput]) -> Result<()> {
        for (i, out) in outputs.iter().enumerate() {
            let sa = self.segments.get(i).ok_or(Error::Unassigned(i))?;
            if sa.mapping.len() != out.n_local() || sa.mapping.iter().any(|&t| t >= OUTPUT_TRACKS) {
                return Err(Error::Unassigned(i));
            }
            if matches!(out.tracks, LocalTracks::Masked(_)) {
                let mut seen = [false; OUTPUT_TRACKS];
                for &t in &sa.mapping {
                    if std::mem::replace(&mut seen[t], true) {
                        return Err(Error::InvalidSegments(format!(
                            "segment {i} maps two local speakers to track {t}"
                        )));
                    }
                }
            }
        }
        if self.segments.len() != outputs.len() {
            return Err(Error::InvalidSegments(format!(
                "{} assignments for {} segments",
                self.segments.len(),
                outputs.len()
            )));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Zero-lag normalised correlation; `None` when either side is silent.
fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let den = (dot(a, a) * dot(b, b)).sqrt();
    (den > 0.0).then(|| dot(a, b) / den)
}

/// Assigns each segment output to the stem it correlates with best,
/// restricted to the samples the segment's frames touch. Multi-speaker
/// segments take the permutation with the largest correlation sum.
pub fn resolve_oracle(
    mix_spec: &Spectrogram,
    outputs: &[SegmentOutput],
    stems: &[AudioBuffer],
    out_len: usize,
) -> Result<Assignment> {
    if stems.len() != OUTPUT_TRACKS {
        return Err(Error::ShapeMismatch(format!(
            "{} stems, expected {OUTPUT_TRACKS}",
            stems.len()
        )));
    }
    let mut segments = Vec::with_capacity(outputs.len());
    let mut flagged = Vec::new();
    for (i, out) in outputs.iter().enumerate() {
        let support = mix_spec.sample_support(out.segment.frames());
        let support = support.start.min(out_len)..support.end.min(out_len);
        if stems.iter().any(|s| s.len() < support.end) {
            return Err(Error::LengthMismatch(format!(
                "stems shorter than segment {i} support"
            )));
        }
        let n = out.n_local();
        let corr: Vec<Vec<Option<f64>>> = (0..n)
            .map(|j| {
                let w = out.local_waveform(mix_spec, j, out_len)?;
                let w = &w.samples()[support.clone()];
                Ok(stems
                    .iter()
                    .map(|s| correlation(w, &s.samples()[support.clone()]))
                    .collect())
            })
            .collect::<Result<_>>()?;
        let mapping = match n {
            0 => vec![],
            1 => {
                let mut best: Option<(usize, f64)> = None;
                for (s, c) in corr[0].iter().enumerate() {
                    if let Some(c) = c {
                        if best.is_none_or(|(_, b)| *c > b) {
                            best = Some((s, *c));
                        }
                    }
                }
                match best {
                    Some((s, _)) => vec![s],
                    None => {
                        flagged.push(i);
                        vec![0]
                    }
                }
            }
            _ => {
                if corr.iter().flatten().all(|c| c.is_none()) {
                    flagged.push(i);
                    (0..n).collect()
                } else {
                    let score =
                        |p: &[usize]| -> f64 { (0..n).map(|j| corr[j][p[j]].unwrap_or(0.0)).sum() };
                    let (id, sw) = (vec![0, 1], vec![1, 0]);
                    if score(&sw) > score(&id) {
                        sw
                    } else {
                        id
                    }
                }
            }
        };
        segments.push(SegmentAssignment {
            segment_index: i,
            mapping,
        });
    }
    Ok(Assignment {
        method: ResolverKind::Oracle,
        segments,
        fallback_used: false,
        flagged_segments: flagged,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn group_score(group: &[&[f64]], kind: GroupScore) -> f64 {
    let n = group.len();
    if n < 2 {
        return 0.0;
    }
    match kind {
        GroupScore::MeanPairwise => {
            let mut s = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    s += dist(group[i], group[j]);
                }
            }
            s / (n * (n - 1) / 2) as f64
        }
        GroupScore::Centroid => {
            let d = group[0].len();
            let c: Vec<f64> = (0..d)
                .map(|k| group.iter().map(|g| g[k]).sum::<f64>() / n as f64)
                .collect();
            group.iter().map(|g| dist(g, &c)).sum::<f64>() / n as f64
        }
    }
}

/// Joint score of flip bits `flips` (one per multi segment; `flips[0]` is
/// the anchor and always 0).
fn joint_score(multi: &[&[Vec<f64>]], flips: &[bool], kind: GroupScore) -> f64 {
    (0..OUTPUT_TRACKS)
        .map(|g| {
            let group: Vec<&[f64]> = multi
                .iter()
                .zip(flips)
                .map(|(m, &f)| m[g ^ usize::from(f)].as_slice())
                .collect();
            group_score(&group, kind)
        })
        .sum()
}

/// Exhaustive search over the `2^(S-1)` flip patterns. The counter's most
/// significant bit is the second multi segment, so the first minimiser
/// found is the lexicographically smallest.
fn exhaustive(multi: &[&[Vec<f64>]], kind: GroupScore) -> Vec<bool> {
    let s = multi.len();
    if s <= 1 {
        return vec![false; s];
    }
    let free = s - 1;
    let decode = |code: u64| -> Vec<bool> {
        std::iter::once(false)
            .chain((0..free).map(|i| (code >> (free - 1 - i)) & 1 == 1))
            .collect()
    };
    let mut best = (f64::INFINITY, 0u64);
    match kind {
        GroupScore::MeanPairwise => {
            // The pairwise score decomposes over segment pairs: pair (i, j)
            // contributes `same[i][j]` when their flips agree, `cross` else.
            let mut same = vec![vec![0.0; s]; s];
            let mut cross = vec![vec![0.0; s]; s];
            for i in 0..s {
                for j in i + 1..s {
                    same[i][j] =
                        dist(&multi[i][0], &multi[j][0]) + dist(&multi[i][1], &multi[j][1]);
                    cross[i][j] =
                        dist(&multi[i][0], &multi[j][1]) + dist(&multi[i][1], &multi[j][0]);
                }
            }
            let pairs = (s * (s - 1) / 2) as f64;
            for code in 0..(1u64 << free) {
                let f = decode(code);
                let mut total = 0.0;
                for i in 0..s {
                    for j in i + 1..s {
                        total += if f[i] == f[j] {
                            same[i][j]
                        } else {
                            cross[i][j]
                        };
                    }
                }
                let score = total / pairs;
                if score < best.0 {
                    best = (score, code);
                }
            }
        }
        GroupScore::Centroid => {
            for code in 0..(1u64 << free) {
                let score = joint_score(multi, &decode(code), kind);
                if score < best.0 {
                    best = (score, code);
                }
            }
        }
    }
    decode(best.1)
}

/// Time-ordered greedy search: each segment takes the flip that places its
/// vectors closest to the running track means.
fn greedy(multi: &[&[Vec<f64>]]) -> Vec<bool> {
    let Some(first) = multi.first() else {
        return vec![];
    };
    let d = first[0].len();
    let mut sums: Vec<Vec<f64>> = (0..OUTPUT_TRACKS).map(|g| first[g].clone()).collect();
    let mut count = 1.0;
    let mut flips = vec![false];
    for m in &multi[1..] {
        let means: Vec<Vec<f64>> = sums
            .iter()
            .map(|s| s.iter().map(|x| x / count).collect())
            .collect();
        let cost =
            |f: usize| -> f64 { (0..OUTPUT_TRACKS).map(|g| dist(&m[g ^ f], &means[g])).sum() };
        let flip = cost(1) < cost(0);
        for g in 0..OUTPUT_TRACKS {
            let v = &m[g ^ usize::from(flip)];
            for k in 0..d {
                sums[g][k] += v[k];
            }
        }
        count += 1.0;
        flips.push(flip);
    }
    flips
}

fn nearest(v: &[f64], anchors: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (g, a) in anchors.iter().enumerate() {
        let d = dist(v, a);
        if d < best.1 {
            best = (g, d);
        }
    }
    best.0
}

fn resolve_by_means(
    outputs: &[SegmentOutput],
    means: &[&[Vec<f64>]],
    method: ResolverKind,
    opts: &AffinityOptions,
) -> Assignment {
    let multi_idx: Vec<usize> = (0..outputs.len())
        .filter(|&i| outputs[i].n_local() == OUTPUT_TRACKS)
        .collect();
    let multi: Vec<&[Vec<f64>]> = multi_idx.iter().map(|&i| means[i]).collect();
    let fallback = opts.force_greedy || multi.len() > opts.exhaustive_limit;
    let flips = if fallback {
        greedy(&multi)
    } else {
        exhaustive(&multi, opts.score)
    };

    let singles: Vec<usize> = (0..outputs.len())
        .filter(|&i| outputs[i].n_local() == 1)
        .collect();
    let anchors: Vec<Vec<f64>> = if multi.is_empty() {
        // No clustered segment to anchor the tracks: the first single-speaker
        // segment defines track 0, the one farthest from it track 1.
        match singles.first() {
            None => vec![],
            Some(&s0) => {
                let a0 = means[s0][0].clone();
                let mut far = (None, 0.0);
                for &s in &singles {
                    let d = dist(&means[s][0], &a0);
                    if d > far.1 {
                        far = (Some(s), d);
                    }
                }
                match far.0 {
                    Some(s) => vec![a0, means[s][0].clone()],
                    None => vec![a0],
                }
            }
        }
    } else {
        let d = multi[0][0].len();
        (0..OUTPUT_TRACKS)
            .map(|g| {
                let mut m = vec![0.0; d];
                for (mv, &f) in multi.iter().zip(&flips) {
                    for (a, x) in m.iter_mut().zip(&mv[g ^ usize::from(f)]) {
                        *a += x;
                    }
                }
                m.iter().map(|x| x / multi.len() as f64).collect()
            })
            .collect()
    };

    let mut flip_of = vec![false; outputs.len()];
    for (&i, &f) in multi_idx.iter().zip(&flips) {
        flip_of[i] = f;
    }
    let segments = outputs
        .iter()
        .enumerate()
        .map(|(i, out)| {
            let mapping = match out.n_local() {
                0 => vec![],
                1 => vec![nearest(&means[i][0], &anchors)],
                _ => (0..OUTPUT_TRACKS)
                    .map(|j| j ^ usize::from(flip_of[i]))
                    .collect(),
            };
            SegmentAssignment {
                segment_index: i,
                mapping,
            }
        })
        .collect();
    Assignment {
        method,
        segments,
        fallback_used: fallback,
        flagged_segments: vec![],
    }
}

fn check_locals(outputs: &[SegmentOutput]) -> Result<()> {
    for (i, o) in outputs.iter().enumerate() {
        let n = o.n_local();
        if n > OUTPUT_TRACKS || (o.segment.kind == SegmentKind::Multi && n != OUTPUT_TRACKS) {
            return Err(Error::InvalidSegments(format!(
                "segment {i} has {n} local speakers"
            )));
        }
    }
    Ok(())
}

/// Groups per-segment mean embeddings so that each track's group is as
/// tight as possible, then routes single-speaker segments to the nearest
/// track mean.
pub fn resolve_affinity(outputs: &[SegmentOutput], opts: &AffinityOptions) -> Result<Assignment> {
    check_locals(outputs)?;
    let means: Vec<&[Vec<f64>]> = outputs
        .iter()
        .enumerate()
        .map(|(i, o)| match (&o.means, o.n_local()) {
            (_, 0) => Ok(&[][..]),
            (Some(m), _) => Ok(m.as_slice()),
            (None, _) => Err(Error::MissingEmbeddings(i)),
        })
        .collect::<Result<_>>()?;
    Ok(resolve_by_means(
        outputs,
        &means,
        ResolverKind::Affinity,
        opts,
    ))
}

/// The affinity search on speaker-identification embeddings.
pub fn resolve_speaker_id(outputs: &[SegmentOutput], opts: &AffinityOptions) -> Result<Assignment> {
    check_locals(outputs)?;
    let means: Vec<&[Vec<f64>]> = outputs
        .iter()
        .enumerate()
        .map(|(i, o)| match (&o.speaker_id_means, o.n_local()) {
            (_, 0) => Ok(&[][..]),
            (Some(m), _) => Ok(m.as_slice()),
            (None, _) => Err(Error::MissingSpeakerId(i)),
        })
        .collect::<Result<_>>()?;
    Ok(resolve_by_means(
        outputs,
        &means,
        ResolverKind::SpeakerId,
        opts,
    ))
}
