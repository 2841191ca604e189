use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::plan::TrackPlan;
use super::trim::Utterance;
use crate::error::{Error, Result};
use crate::signal::{gain_for_snr, speech_energy, ActivityTrack, AudioBuffer, Span};

#[derive(Debug, Clone)]
pub struct SilenceClip {
    pub source_utterance: String,
    pub audio: AudioBuffer,
    pub power: f64,
}

/// Leading and trailing silences excised during trimming.
#[derive(Debug, Clone, Default)]
pub struct SilenceBank {
    clips: Vec<SilenceClip>,
}

impl SilenceBank {
    pub fn new() -> Self {
        SilenceBank::default()
    }

    /// Adds a clip; empty clips are ignored.
    pub fn push(&mut self, source_utterance: &str, audio: AudioBuffer) {
        if audio.is_empty() {
            return;
        }
        let power = audio.energy() / audio.len() as f64;
        self.clips.push(SilenceClip {
            source_utterance: source_utterance.to_string(),
            audio,
            power,
        });
    }

    pub fn clips(&self) -> &[SilenceClip] {
        &self.clips
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapPiece {
    pub clip: usize,
    pub offset: usize,
    pub len: usize,
}

/// Silence written into one non-speech region of a track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapFill {
    pub span: Span,
    pub pieces: Vec<GapPiece>,
    pub gain: f64,
}

/// Non-speech regions of a track with the power their fill should carry.
fn gap_regions(
    plan: &TrackPlan,
    utts: &HashMap<&str, &Utterance>,
    timeline_len: usize,
) -> Result<Vec<(Span, Option<f64>)>> {
    let spans = plan.spans();
    let lookup = |i: usize| -> Result<&Utterance> {
        let id = plan.utterance_ids[i].as_str();
        utts.get(id)
            .copied()
            .ok_or_else(|| Error::InsufficientCorpus(format!("utterance {id} not in corpus")))
    };
    let mean = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => Some((x + y) / 2.0),
        (x, None) => x,
        (None, y) => y,
    };
    let mut out = Vec::new();
    let mut cursor = 0;
    for (i, s) in spans.iter().enumerate() {
        if s.start > cursor {
            let power = if i == 0 {
                lookup(0)?.leading_power
            } else {
                mean(lookup(i - 1)?.trailing_power, lookup(i)?.leading_power)
            };
            out.push((Span::new(cursor, s.start), power));
        }
        cursor = s.end;
    }
    if timeline_len > cursor && !spans.is_empty() {
        out.push((
            Span::new(cursor, timeline_len),
            lookup(spans.len() - 1)?.trailing_power,
        ));
    }
    Ok(out)
}

fn assemble(bank: &SilenceBank, pieces: &[GapPiece]) -> Vec<f64> {
    pieces
        .iter()
        .flat_map(|p| {
            bank.clips[p.clip].audio.samples()[p.offset..p.offset + p.len]
                .iter()
                .copied()
        })
        .collect()
}

/// Draws bank material for every non-speech region of `plan` and sets its
/// gain so the fill's mean power equals the mean of the adjacent original
/// silence powers.
pub fn choose_gap_fills(
    plan: &TrackPlan,
    utts: &HashMap<&str, &Utterance>,
    bank: &SilenceBank,
    timeline_len: usize,
    rng: &mut impl Rng,
) -> Result<Vec<GapFill>> {
    let regions = gap_regions(plan, utts, timeline_len)?;
    let needed: usize = regions.iter().map(|r| r.0.len()).sum();
    if needed > 0 && bank.is_empty() {
        return Err(Error::EmptySilenceBank(needed));
    }
    let mut fills = Vec::with_capacity(regions.len());
    for (span, target_power) in regions {
        let mut pieces = Vec::new();
        let mut remaining = span.len();
        while remaining > 0 {
            let clip = rng.random_range(0..bank.len());
            let clip_len = bank.clips[clip].audio.len();
            if clip_len >= remaining {
                let offset = rng.random_range(0..=clip_len - remaining);
                pieces.push(GapPiece {
                    clip,
                    offset,
                    len: remaining,
                });
                remaining = 0;
            } else {
                pieces.push(GapPiece {
                    clip,
                    offset: 0,
                    len: clip_len,
                });
                remaining -= clip_len;
            }
        }
        let raw = assemble(bank, &pieces);
        let raw_power = raw.iter().map(|v| v * v).sum::<f64>() / raw.len() as f64;
        let gain = match target_power {
            Some(p) if raw_power > 0.0 => (p / raw_power).sqrt(),
            _ => 1.0,
        };
        fills.push(GapFill { span, pieces, gain });
    }
    Ok(fills)
}

/// Writes utterances verbatim at their offsets and the recorded gap fills in
/// between. The activity is exactly the utterance spans.
pub fn synthesize_track(
    plan: &TrackPlan,
    utts: &HashMap<&str, &Utterance>,
    bank: &SilenceBank,
    timeline_len: usize,
    sample_rate: u32,
) -> Result<(AudioBuffer, ActivityTrack)> {
    let mut y = vec![0.0; timeline_len];
    for (i, span) in plan.spans().iter().enumerate() {
        let id = plan.utterance_ids[i].as_str();
        let u = utts
            .get(id)
            .ok_or_else(|| Error::InsufficientCorpus(format!("utterance {id} not in corpus")))?;
        if span.end > timeline_len || u.audio.len() != span.len() {
            return Err(Error::LengthMismatch(format!(
                "utterance {id} ({} samples) does not fit span [{}, {})",
                u.audio.len(),
                span.start,
                span.end
            )));
        }
        y[span.start..span.end].copy_from_slice(u.audio.samples());
    }
    for fill in &plan.gap_fills {
        if fill
            .pieces
            .iter()
            .any(|p| p.clip >= bank.len() || p.offset + p.len > bank.clips[p.clip].audio.len())
        {
            return Err(Error::InsufficientCorpus(
                "gap fill references a missing silence clip".into(),
            ));
        }
        let raw = assemble(bank, &fill.pieces);
        if raw.len() != fill.span.len() || fill.span.end > timeline_len {
            return Err(Error::LengthMismatch(
                "gap fill does not match its span".into(),
            ));
        }
        for (dst, v) in y[fill.span.start..fill.span.end].iter_mut().zip(raw) {
            *dst = v * fill.gain;
        }
    }
    let activity = plan.activity(timeline_len)?;
    Ok((AudioBuffer::new(y, sample_rate)?, activity))
}

/// Chooses gap fills for `plan` and renders the track.
pub fn render_track(
    plan: &TrackPlan,
    utts: &HashMap<&str, &Utterance>,
    bank: &SilenceBank,
    timeline_len: usize,
    sample_rate: u32,
    rng: &mut impl Rng,
) -> Result<(AudioBuffer, ActivityTrack, Vec<GapFill>)> {
    let fills = choose_gap_fills(plan, utts, bank, timeline_len, rng)?;
    let filled = TrackPlan {
        gap_fills: fills.clone(),
        ..plan.clone()
    };
    let (audio, act) = synthesize_track(&filled, utts, bank, timeline_len, sample_rate)?;
    Ok((audio, act, fills))
}

#[derive(Debug, Clone)]
pub struct Mixed {
    pub mixture: AudioBuffer,
    /// Track A as it appears in the mixture.
    pub stem_a: AudioBuffer,
    /// Track B after the interferer gain.
    pub stem_b: AudioBuffer,
    pub interferer_gain: f64,
    /// Common factor applied to mixture and stems for peak safety (1.0 if none).
    pub peak_scale: f64,
}

/// `a + g·b` with `g` set from the speech-only energies. If the mixture peak
/// exceeds `peak_limit`, mixture and stems are scaled by the same factor.
pub fn mix(
    track_a: &AudioBuffer,
    track_b: &AudioBuffer,
    act_a: &ActivityTrack,
    act_b: &ActivityTrack,
    target_snr_db: f64,
    peak_limit: f64,
) -> Result<Mixed> {
    if track_a.len() != track_b.len()
        || act_a.len() != track_a.len()
        || act_b.len() != track_b.len()
    {
        return Err(Error::LengthMismatch(
            "tracks and activities must share one timeline".into(),
        ));
    }
    let g = gain_for_snr(
        target_snr_db,
        speech_energy(track_a, act_a),
        speech_energy(track_b, act_b),
    )?;
    let sr = track_a.sample_rate();
    let stem_b: Vec<f64> = track_b.samples().iter().map(|x| g * x).collect();
    let mixture: Vec<f64> = track_a
        .samples()
        .iter()
        .zip(&stem_b)
        .map(|(a, b)| a + b)
        .collect();
    let peak = mixture.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (mixture, stem_a, stem_b, peak_scale) = if peak > peak_limit {
        let s = peak_limit / peak;
        let scale = |v: &[f64]| v.iter().map(|x| x * s).collect::<Vec<_>>();
        (scale(&mixture), scale(track_a.samples()), scale(&stem_b), s)
    } else {
        (mixture, track_a.samples().to_vec(), stem_b, 1.0)
    };
    Ok(Mixed {
        mixture: AudioBuffer::new(mixture, sr)?,
        stem_a: AudioBuffer::new(stem_a, sr)?,
        stem_b: AudioBuffer::new(stem_b, sr)?,
        interferer_gain: g,
        peak_scale,
    })
}
