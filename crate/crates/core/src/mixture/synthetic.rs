//! Synthetic speaker corpora for tests, benches and demos.
//!
//! Each speaker is a harmonic source with its own fundamental and spectral
//! tilt, amplitude-modulated at a syllable-like rate. Utterances are padded
//! with low-level noise so trimming populates the silence bank.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::corpus::{write_jsonl, Corpus, ManifestEntry};
use super::trim::{AlignedWord, RawUtterance, TrimAuthority};
use super::Gender;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::signal::wav::{write_wav, WavFormat};
use crate::signal::AudioBuffer;

const WORDS: &[&str] = &[
    "the", "market", "rose", "sharply", "after", "report", "shares", "of", "company", "fell",
    "analysts", "said", "growth", "would", "slow", "next", "year", "prices", "bank", "rates",
];

#[derive(Debug, Clone)]
pub struct ToyCorpusSpec {
    pub speakers: usize,
    pub utterances_per_speaker: usize,
    pub sample_rate: u32,
    pub min_len_s: f64,
    pub max_len_s: f64,
    /// Every utterance of every speaker has length `min_len_s`. Otherwise
    /// each speaker gets its own shuffle of lengths evenly spaced over
    /// `[min_len_s, max_len_s]`, so all speakers share one total and full
    /// overlap stays reachable.
    pub equal_lengths: bool,
    pub lead_s: f64,
    pub trail_s: f64,
    /// RMS of the padding noise.
    pub noise_rms: f64,
    pub seed: u64,
}

impl Default for ToyCorpusSpec {
    fn default() -> Self {
        ToyCorpusSpec {
            speakers: 4,
            utterances_per_speaker: 3,
            sample_rate: 16_000,
            min_len_s: 0.8,
            max_len_s: 1.6,
            equal_lengths: false,
            lead_s: 0.25,
            trail_s: 0.2,
            noise_rms: 1e-3,
            seed: 1,
        }
    }
}

pub struct ToyUtterance {
    pub raw: RawUtterance,
    pub speech_start_s: f64,
    pub speech_dur_s: f64,
}

fn f32_exact(x: f64) -> f64 {
    x as f32 as f64
}

/// Generates the raw (untrimmed) utterances with their true speech bounds.
pub fn toy_utterances(spec: &ToyCorpusSpec) -> Vec<ToyUtterance> {
    let sr = spec.sample_rate as f64;
    let mut out = Vec::new();
    for s in 0..spec.speakers {
        let mut rng = seeded(derive_seed(spec.seed, s as u64));
        let gender = if s % 2 == 0 {
            Gender::Male
        } else {
            Gender::Female
        };
        let f0_base = match gender {
            Gender::Male => 95.0 + 12.0 * (s / 2) as f64,
            _ => 185.0 + 15.0 * (s / 2) as f64,
        };
        let tilt = 0.7 + 0.1 * (s % 3) as f64;
        let noise = Normal::new(0.0, spec.noise_rms.max(0.0)).unwrap();
        let n_utt = spec.utterances_per_speaker;
        let mut ladder: Vec<f64> = (0..n_utt)
            .map(|u| {
                let span = (spec.max_len_s - spec.min_len_s).max(0.0);
                if spec.equal_lengths || n_utt < 2 {
                    spec.min_len_s
                } else {
                    spec.min_len_s + span * u as f64 / (n_utt - 1) as f64
                }
            })
            .collect();
        ladder.shuffle(&mut rng);
        for (u, &dur) in ladder.iter().enumerate() {
            let n_lead = (spec.lead_s * sr).round() as usize;
            let n_speech = (dur * sr).round() as usize;
            let n_trail = (spec.trail_s * sr).round() as usize;
            let f0 = f0_base * rng.random_range(0.95..1.05);
            let syll = rng.random_range(3.0..5.0);
            let phase0: f64 = rng.random_range(0.0..2.0 * PI);
            let n_harm = ((4000.0 / f0) as usize).max(1);
            let mut x = Vec::with_capacity(n_lead + n_speech + n_trail);
            for _ in 0..n_lead {
                x.push(f32_exact(noise.sample(&mut rng)));
            }
            for i in 0..n_speech {
                let t = i as f64 / sr;
                let vibrato = 1.0 + 0.02 * (2.0 * PI * 5.0 * t).sin();
                let env = 0.55 + 0.45 * (2.0 * PI * syll * t + phase0).sin();
                let mut v = 0.0;
                for h in 1..=n_harm {
                    v += (2.0 * PI * f0 * h as f64 * t * vibrato + h as f64).sin()
                        / (h as f64).powf(tilt);
                }
                x.push(f32_exact(0.12 * env * v + noise.sample(&mut rng)));
            }
            for _ in 0..n_trail {
                x.push(f32_exact(noise.sample(&mut rng)));
            }
            let n_words = 2 + (dur * 2.0) as usize;
            let transcript = (0..n_words)
                .map(|_| WORDS[rng.random_range(0..WORDS.len())].to_string())
                .collect();
            out.push(ToyUtterance {
                raw: RawUtterance {
                    id: format!("spk{s}_utt{u}"),
                    speaker_id: format!("spk{s}"),
                    gender,
                    audio: AudioBuffer::new(x, spec.sample_rate).expect("finite synthetic audio"),
                    transcript: Some(transcript),
                },
                speech_start_s: n_lead as f64 / sr,
                speech_dur_s: n_speech as f64 / sr,
            });
        }
    }
    out
}

fn alignment(u: &ToyUtterance) -> Vec<AlignedWord> {
    vec![AlignedWord {
        utterance: u.raw.id.clone(),
        start_s: u.speech_start_s,
        duration_s: u.speech_dur_s,
        word: "speech".into(),
    }]
}

/// In-memory corpus trimmed with exact alignments.
pub fn toy_corpus(spec: &ToyCorpusSpec) -> Result<Corpus> {
    Corpus::from_raw(
        toy_utterances(spec)
            .into_iter()
            .map(|u| {
                let a = TrimAuthority::Alignment(alignment(&u));
                (u.raw, a)
            })
            .collect(),
    )
}

/// Writes WAVs (float32), CTM alignments and `manifest.jsonl` under `dir`;
/// returns the manifest path. Loading it yields the same corpus as
/// [`toy_corpus`].
pub fn write_toy_corpus(dir: &Path, spec: &ToyCorpusSpec) -> Result<PathBuf> {
    let wav_dir = dir.join("wav");
    fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
    let mut entries = Vec::new();
    for u in toy_utterances(spec) {
        let wav = format!("wav/{}.wav", u.raw.id);
        let ctm = format!("wav/{}.ctm", u.raw.id);
        write_wav(dir.join(&wav), &u.raw.audio, WavFormat::Float32)?;
        let text: String = alignment(&u)
            .iter()
            .map(|w| {
                format!(
                    "{} 1 {} {} {}\n",
                    w.utterance, w.start_s, w.duration_s, w.word
                )
            })
            .collect();
        let ctm_path = dir.join(&ctm);
        fs::write(&ctm_path, text).map_err(|e| Error::io(&ctm_path, e))?;
        entries.push(ManifestEntry {
            id: u.raw.id.clone(),
            speaker_id: u.raw.speaker_id.clone(),
            gender: u.raw.gender,
            wav_path: wav,
            transcript: u.raw.transcript.as_ref().map(|t| t.join(" ")),
            alignment_path: Some(ctm),
        });
    }
    let manifest = dir.join("manifest.jsonl");
    write_jsonl(&manifest, &entries)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::{load_corpus, EnergyVad};

    #[test]
    fn written_corpus_loads_identically() {
        let spec = ToyCorpusSpec {
            speakers: 2,
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_toy_corpus(dir.path(), &spec).unwrap();
        let loaded = load_corpus(&manifest, EnergyVad::default()).unwrap();
        let direct = toy_corpus(&spec).unwrap();
        assert_eq!(loaded.utterances.len(), 6);
        for (a, b) in loaded.utterances.iter().zip(&direct.utterances) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.audio, b.audio);
            assert_eq!(a.transcript, b.transcript);
            assert_eq!(a.gender, b.gender);
        }
        assert_eq!(loaded.bank.len(), direct.bank.len());
    }
}
