use std::f64::consts::PI;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::AudioBuffer;
use crate::error::{Error, Result};
use crate::exec::Exec;

const FRAME_CHUNK: usize = 32;
/// Maximum relative ripple of the summed squared window before the
/// configuration is rejected as not overlap-add consistent.
const COLA_RIPPLE_TOL: f64 = 1e-9;
/// Output samples whose window sum falls below this fraction of its peak
/// are divided by the floor instead; they lie inside the first and last
/// window, outside the reconstruction interior.
const EDGE_NORM_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hann,
}

/// Analysis parameters in milliseconds; sample counts follow from the
/// sample rate (`round(ms * sr / 1000)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftParams {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub dft_size: usize,
    #[serde(default)]
    pub window_kind: WindowKind,
}

impl StftParams {
    /// 32 ms window, 8 ms shift, 512-point DFT.
    pub fn separation() -> Self {
        StftParams {
            window_ms: 32.0,
            hop_ms: 8.0,
            dft_size: 512,
            window_kind: WindowKind::Hann,
        }
    }

    /// 25 ms window, 10 ms shift, 512-point DFT.
    pub fn features() -> Self {
        StftParams {
            window_ms: 25.0,
            hop_ms: 10.0,
            dft_size: 512,
            window_kind: WindowKind::Hann,
        }
    }

    pub fn win_len(&self, sample_rate: u32) -> usize {
        (self.window_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn n_freqs(&self) -> usize {
        self.dft_size / 2 + 1
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let win = self.win_len(sample_rate);
        let hop = self.hop_len(sample_rate);
        if !(self.window_ms.is_finite() && self.hop_ms.is_finite()) {
            return Err(Error::InvalidParams("window and hop must be finite".into()));
        }
        if win == 0 || hop == 0 {
            return Err(Error::InvalidParams(format!(
                "window ({win}) and hop ({hop}) must span at least one sample"
            )));
        }
        if hop > win {
            return Err(Error::InvalidParams(format!(
                "hop {} ms exceeds window {} ms",
                self.hop_ms, self.window_ms
            )));
        }
        if self.dft_size < win {
            return Err(Error::InvalidParams(format!(
                "DFT size {} is smaller than the {win}-sample window",
                self.dft_size
            )));
        }
        Ok(())
    }

    /// `1 + floor((len - win) / hop)`, or `None` when `len < win`.
    pub fn frame_count(&self, len: usize, sample_rate: u32) -> Option<usize> {
        let win = self.win_len(sample_rate);
        let hop = self.hop_len(sample_rate).max(1);
        (len >= win).then(|| 1 + (len - win) / hop)
    }

    /// Periodic window of `win_len` samples.
    pub fn window(&self, sample_rate: u32) -> Vec<f64> {
        let n = self.win_len(sample_rate);
        match self.window_kind {
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }

    /// Checks that the summed squared window is constant in steady state.
    pub fn check_cola(&self, sample_rate: u32) -> Result<()> {
        self.validate(sample_rate)?;
        let w = self.window(sample_rate);
        let hop = self.hop_len(sample_rate);
        let sums: Vec<f64> = (0..hop)
            .map(|r| w.iter().skip(r).step_by(hop).map(|v| v * v).sum())
            .collect();
        let max = sums.iter().cloned().fold(f64::MIN, f64::max);
        let min = sums.iter().cloned().fold(f64::MAX, f64::min);
        if max.is_nan() || max <= 0.0 || (max - min) / max > COLA_RIPPLE_TOL {
            return Err(Error::NotCola(format!(
                "summed squared {:?} window ({} samples) at hop {hop} varies by {:.3e} relative; \
                 weighted overlap-add requires a constant sum",
                self.window_kind,
                w.len(),
                if max > 0.0 {
                    (max - min) / max
                } else {
                    f64::INFINITY
                }
            )));
        }
        Ok(())
    }
}

impl Default for StftParams {
    fn default() -> Self {
        StftParams::separation()
    }
}

/// Complex STFT grid, `frames × (dft_size/2 + 1)`, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Vec<Complex64>,
    frames: usize,
    freqs: usize,
    params: StftParams,
    sample_rate: u32,
}

impl Spectrogram {
    pub fn zeros(frames: usize, params: StftParams, sample_rate: u32) -> Self {
        let freqs = params.n_freqs();
        Spectrogram {
            data: vec![Complex64::new(0.0, 0.0); frames * freqs],
            frames,
            freqs,
            params,
            sample_rate,
        }
    }

    pub fn from_data(
        data: Vec<Complex64>,
        frames: usize,
        params: StftParams,
        sample_rate: u32,
    ) -> Result<Self> {
        let freqs = params.n_freqs();
        if data.len() != frames * freqs {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {frames}x{freqs} grid",
                data.len()
            )));
        }
        if data.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::InvalidAudio("non-finite spectrogram entry".into()));
        }
        Ok(Spectrogram {
            data,
            frames,
            freqs,
            params,
            sample_rate,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn freqs(&self) -> usize {
        self.freqs
    }

    pub fn params(&self) -> &StftParams {
        &self.params
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn win_len(&self) -> usize {
        self.params.win_len(self.sample_rate)
    }

    pub fn hop_len(&self) -> usize {
        self.params.hop_len(self.sample_rate)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, t: usize, f: usize) -> Complex64 {
        self.data[t * self.freqs + f]
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.freqs..(t + 1) * self.freqs]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [Complex64] {
        &mut self.data[t * self.freqs..(t + 1) * self.freqs]
    }

    pub fn same_shape(&self, other: &Spectrogram) -> bool {
        self.frames == other.frames && self.freqs == other.freqs
    }

    /// Sample range covered by the full steady-state overlap of frames.
    pub fn interior(&self) -> Range<usize> {
        let (win, hop) = (self.win_len(), self.hop_len());
        let start = win.saturating_sub(hop);
        let end = self.frames * hop;
        start..end.max(start)
    }

    /// Sample range touched by frames `frames`.
    pub fn sample_support(&self, frames: Range<usize>) -> Range<usize> {
        if frames.is_empty() {
            return 0..0;
        }
        let hop = self.hop_len();
        frames.start * hop..(frames.end - 1) * hop + self.win_len()
    }

    /// Weighted overlap-add of the frames in `frames` only, normalized by the
    /// squared-window sum of the complete grid.
    pub fn istft_frames(&self, frames: Range<usize>, out_len: usize) -> Result<AudioBuffer> {
        self.istft_frames_with(frames, out_len, Exec::Sequential)
    }

    pub fn istft_frames_with(
        &self,
        frames: Range<usize>,
        out_len: usize,
        exec: Exec,
    ) -> Result<AudioBuffer> {
        self.params.check_cola(self.sample_rate)?;
        if frames.end > self.frames {
            return Err(Error::ShapeMismatch(format!(
                "frame range {frames:?} outside {} frames",
                self.frames
            )));
        }
        let win = self.win_len();
        let hop = self.hop_len();
        let n = self.params.dft_size;
        let window = self.params.window(self.sample_rate);
        let covered = if self.frames == 0 {
            0
        } else {
            (self.frames - 1) * hop + win
        };

        let mut norm = vec![0.0f64; covered];
        for t in 0..self.frames {
            for (i, w) in window.iter().enumerate() {
                norm[t * hop + i] += w * w;
            }
        }
        let norm_max = norm.iter().cloned().fold(0.0, f64::max);

        let ifft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_inverse(n);
        let first = frames.start;
        let count = frames.len();
        let mut grains = vec![0.0f64; count * win];
        exec.for_each_chunk_mut(&mut grains, FRAME_CHUNK * win, |chunk_idx, out| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
            for (j, grain) in out.chunks_mut(win).enumerate() {
                let t = first + chunk_idx * FRAME_CHUNK + j;
                let frame = self.frame(t);
                buf[..frame.len()].copy_from_slice(frame);
                for f in 1..n - frame.len() + 1 {
                    buf[n - f] = frame[f].conj();
                }
                ifft.process_with_scratch(&mut buf, &mut scratch);
                for (i, g) in grain.iter_mut().enumerate() {
                    *g = buf[i].re / n as f64 * window[i];
                }
            }
        });

        let mut y = vec![0.0f64; out_len];
        for (j, grain) in grains.chunks(win.max(1)).enumerate() {
            let offset = (first + j) * hop;
            for (i, g) in grain.iter().enumerate() {
                if let Some(v) = y.get_mut(offset + i) {
                    *v += g;
                }
            }
        }
        // Floored divisor: masked spectrograms are not consistent STFTs, and
        // dividing by the vanishing edge window sum would amplify them.
        let floor = norm_max * EDGE_NORM_FLOOR;
        for (i, v) in y.iter_mut().enumerate().take(covered) {
            *v = if floor > 0.0 {
                *v / norm[i].max(floor)
            } else {
                0.0
            };
        }
        AudioBuffer::new(y, self.sample_rate)
    }
}

pub fn stft(audio: &AudioBuffer, params: &StftParams) -> Result<Spectrogram> {
    stft_with(audio, params, Exec::Sequential)
}

pub fn stft_with(audio: &AudioBuffer, params: &StftParams, exec: Exec) -> Result<Spectrogram> {
    let sr = audio.sample_rate();
    params.validate(sr)?;
    let win = params.win_len(sr);
    let hop = params.hop_len(sr);
    let frames = params
        .frame_count(audio.len(), sr)
        .ok_or(Error::SignalTooShort {
            len: audio.len(),
            window: win,
        })?;
    let n = params.dft_size;
    let freqs = params.n_freqs();
    let window = params.window(sr);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    let x = audio.samples();

    let mut data = vec![Complex64::new(0.0, 0.0); frames * freqs];
    exec.for_each_chunk_mut(&mut data, FRAME_CHUNK * freqs, |chunk_idx, out| {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for (j, row) in out.chunks_mut(freqs).enumerate() {
            let start = (chunk_idx * FRAME_CHUNK + j) * hop;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = if i < win {
                    Complex64::new(x[start + i] * window[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            row.copy_from_slice(&buf[..freqs]);
        }
    });
    Spectrogram::from_data(data, frames, *params, sr)
}

/// Inverse STFT by weighted overlap-add; samples past the last full frame are
/// zero.
pub fn istft(spec: &Spectrogram, out_len: usize) -> Result<AudioBuffer> {
    spec.istft_frames(0..spec.frames(), out_len)
}
