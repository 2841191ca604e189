use serde::{Deserialize, Serialize};

use super::Gender;
use crate::error::{Error, Result};
use crate::signal::{ActivityTrack, AudioBuffer, Span};

/// An utterance as read from the corpus, before trimming.
#[derive(Debug, Clone)]
pub struct RawUtterance {
    pub id: String,
    pub speaker_id: String,
    pub gender: Gender,
    pub audio: AudioBuffer,
    pub transcript: Option<Vec<String>>,
}

/// A trimmed utterance: speech from first to last sample.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub id: String,
    pub speaker_id: String,
    pub gender: Gender,
    pub audio: AudioBuffer,
    pub activity: ActivityTrack,
    pub transcript: Option<Vec<String>>,
    /// Mean per-sample power of the excised leading silence, if any.
    pub leading_power: Option<f64>,
    pub trailing_power: Option<f64>,
}

/// One CTM entry: `<utt> <channel> <start_s> <dur_s> <word> [conf]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedWord {
    pub utterance: String,
    pub start_s: f64,
    pub duration_s: f64,
    pub word: String,
}

impl AlignedWord {
    fn is_silence(&self) -> bool {
        matches!(
            self.word.to_ascii_lowercase().as_str(),
            "sil" | "<sil>" | "!sil" | "[sil]" | "silence" | "[silence]" | "<s>" | "</s>" | "<eps>"
        )
    }
}

pub fn parse_ctm(text: &str) -> std::result::Result<Vec<AlignedWord>, String> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(";;") || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 5 {
            return Err(format!("line {}: expected at least 5 fields", no + 1));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| format!("line {}: bad time {s:?}", no + 1))
        };
        out.push(AlignedWord {
            utterance: fields[0].to_string(),
            start_s: num(fields[2])?,
            duration_s: num(fields[3])?,
            word: fields[4].to_string(),
        });
    }
    Ok(out)
}

/// Frame-power detector used when no alignment is available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyVad {
    pub threshold_dbfs: f64,
    pub frame_ms: f64,
    /// Speech is extended this long past the last active frame.
    pub hangover_ms: f64,
}

impl Default for EnergyVad {
    fn default() -> Self {
        EnergyVad {
            threshold_dbfs: -40.0,
            frame_ms: 10.0,
            hangover_ms: 10.0,
        }
    }
}

impl EnergyVad {
    fn speech_span(&self, audio: &AudioBuffer) -> Option<Span> {
        let sr = audio.sample_rate() as f64;
        let frame = ((self.frame_ms * sr / 1000.0).round() as usize).max(1);
        let hang = (self.hangover_ms * sr / 1000.0).round() as usize;
        let x = audio.samples();
        let active = |c: &[f64]| {
            let p = c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64;
            10.0 * (p + 1e-20).log10() > self.threshold_dbfs
        };
        let chunks: Vec<bool> = x.chunks(frame).map(active).collect();
        let first = chunks.iter().position(|a| *a)?;
        let last = chunks.iter().rposition(|a| *a)?;
        Some(Span::new(
            first * frame,
            ((last + 1) * frame + hang).min(x.len()),
        ))
    }
}

#[derive(Debug, Clone)]
pub enum TrimAuthority {
    Alignment(Vec<AlignedWord>),
    EnergyVad(EnergyVad),
}

fn alignment_span(words: &[AlignedWord], id: &str, audio: &AudioBuffer) -> Option<Span> {
    let sr = audio.sample_rate() as f64;
    let own: Vec<&AlignedWord> = if words.iter().any(|w| w.utterance == id) {
        words.iter().filter(|w| w.utterance == id).collect()
    } else {
        words.iter().collect()
    };
    let speech = own.iter().filter(|w| !w.is_silence() && w.duration_s > 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for w in speech {
        lo = lo.min(w.start_s);
        hi = hi.max(w.start_s + w.duration_s);
    }
    if !lo.is_finite() {
        return None;
    }
    let len = audio.len();
    let start = ((lo * sr).round() as usize).min(len);
    let end = ((hi * sr).round() as usize).min(len);
    (end > start).then(|| Span::new(start, end))
}

fn mean_power(a: &AudioBuffer) -> Option<f64> {
    (!a.is_empty()).then(|| a.energy() / a.len() as f64)
}

/// Cuts leading and trailing silence. Returns the trimmed utterance with the
/// excised leading and trailing clips.
pub fn trim_silence(
    raw: RawUtterance,
    authority: &TrimAuthority,
) -> Result<(Utterance, AudioBuffer, AudioBuffer)> {
    if raw.audio.is_empty() {
        return Err(Error::InvalidAudio(format!(
            "utterance {} is empty",
            raw.id
        )));
    }
    let span = match authority {
        TrimAuthority::Alignment(words) => alignment_span(words, &raw.id, &raw.audio),
        TrimAuthority::EnergyVad(vad) => vad.speech_span(&raw.audio),
    }
    .ok_or_else(|| Error::AllSilent(raw.id.clone()))?;
    let len = raw.audio.len();
    let leading = raw.audio.slice(0, span.start);
    let trailing = raw.audio.slice(span.end, len);
    let speech = raw.audio.slice(span.start, span.end);
    let utt = Utterance {
        leading_power: mean_power(&leading),
        trailing_power: mean_power(&trailing),
        activity: ActivityTrack::full(speech.len()),
        audio: speech,
        id: raw.id,
        speaker_id: raw.speaker_id,
        gender: raw.gender,
        transcript: raw.transcript,
    };
    Ok((utt, leading, trailing))
}
