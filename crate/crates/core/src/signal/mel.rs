use super::{stft_with, AudioBuffer, StftParams};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Added to filterbank energies before the natural log.
pub const LOG_MEL_FLOOR: f64 = 1e-10;

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

fn mel_edges(n_mels: usize, sample_rate: u32) -> Vec<f64> {
    let top = hz_to_mel(sample_rate as f64 / 2.0);
    (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect()
}

/// Center frequencies (Hz) of the HTK-scale triangular filters spanning
/// 0 Hz to Nyquist.
pub fn mel_center_frequencies(n_mels: usize, sample_rate: u32) -> Vec<f64> {
    let edges = mel_edges(n_mels, sample_rate);
    edges[1..=n_mels].to_vec()
}

/// `n_mels × (dft_size/2 + 1)` triangular filterbank with unit peaks.
pub fn mel_filterbank(n_mels: usize, dft_size: usize, sample_rate: u32) -> Result<FeatureMatrix> {
    if n_mels == 0 {
        return Err(Error::InvalidParams("n_mels must be at least 1".into()));
    }
    let freqs = dft_size / 2 + 1;
    let edges = mel_edges(n_mels, sample_rate);
    let bin_hz = sample_rate as f64 / dft_size as f64;
    let mut data = vec![0.0; n_mels * freqs];
    for m in 0..n_mels {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = &mut data[m * freqs..(m + 1) * freqs];
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            *w = if f > lo && f <= mid {
                (f - lo) / (mid - lo)
            } else if f > mid && f < hi {
                (hi - f) / (hi - mid)
            } else {
                0.0
            };
        }
        if row.iter().all(|w| *w <= 0.0) {
            return Err(Error::TooManyMels { n_mels, channel: m });
        }
    }
    Ok(FeatureMatrix {
        rows: n_mels,
        cols: freqs,
        data,
    })
}

/// Unnormalized log-Mel features, one row per analysis frame.
pub fn log_mel(audio: &AudioBuffer, n_mels: usize, params: &StftParams) -> Result<FeatureMatrix> {
    log_mel_with(audio, n_mels, params, Exec::Sequential)
}

pub fn log_mel_with(
    audio: &AudioBuffer,
    n_mels: usize,
    params: &StftParams,
    exec: Exec,
) -> Result<FeatureMatrix> {
    let bank = mel_filterbank(n_mels, params.dft_size, audio.sample_rate())?;
    let spec = stft_with(audio, params, exec)?;
    let mut data = Vec::with_capacity(spec.frames() * n_mels);
    for t in 0..spec.frames() {
        let power: Vec<f64> = spec.frame(t).iter().map(|c| c.norm_sqr()).collect();
        for m in 0..n_mels {
            let e: f64 = bank.row(m).iter().zip(&power).map(|(w, p)| w * p).sum();
            data.push((e + LOG_MEL_FLOOR).ln());
        }
    }
    Ok(FeatureMatrix {
        rows: spec.frames(),
        cols: n_mels,
        data,
    })
}
