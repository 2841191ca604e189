//! Numeric substrate: audio buffers, activity tracks, STFT/ISTFT, log-Mel
//! features, speech energy and SNR gains.

mod activity;
mod mel;
mod stft;
pub mod wav;

pub use activity::{ActivityTrack, Span};
pub use mel::{
    log_mel, log_mel_with, mel_center_frequencies, mel_filterbank, FeatureMatrix, LOG_MEL_FLOOR,
};
pub use stft::{istft, stft, stft_with, Spectrogram, StftParams, WindowKind};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Mono waveform. Samples are finite and nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidAudio("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidAudio(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(AudioBuffer {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        AudioBuffer {
            samples: vec![0.0; len],
            sample_rate: sample_rate.max(1),
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn slice(&self, start: usize, end: usize) -> AudioBuffer {
        AudioBuffer {
            samples: self.samples[start..end].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn scaled(&self, gain: f64) -> AudioBuffer {
        AudioBuffer {
            samples: self.samples.iter().map(|x| x * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Sum of squared samples over the active spans of `activity`.
pub fn speech_energy(audio: &AudioBuffer, activity: &ActivityTrack) -> f64 {
    let x = audio.samples();
    activity
        .spans()
        .iter()
        .map(|s| {
            let end = s.end.min(x.len());
            let start = s.start.min(end);
            x[start..end].iter().map(|v| v * v).sum::<f64>()
        })
        .sum()
}

/// Amplitude gain for the interferer so that the reference-to-interferer
/// energy ratio equals `target_snr_db`.
pub fn gain_for_snr(target_snr_db: f64, ref_energy: f64, other_energy: f64) -> Result<f64> {
    if ref_energy.is_nan() || ref_energy <= 0.0 {
        return Err(Error::NonPositiveEnergy {
            which: "reference",
            energy: ref_energy,
        });
    }
    if other_energy.is_nan() || other_energy <= 0.0 {
        return Err(Error::NonPositiveEnergy {
            which: "interferer",
            energy: other_energy,
        });
    }
    Ok((ref_energy / (other_energy * 10f64.powf(target_snr_db / 10.0))).sqrt())
}

/// `10·log10(a / b)`.
pub fn db_ratio(a: f64, b: f64) -> f64 {
    10.0 * (a / b).log10()
}
