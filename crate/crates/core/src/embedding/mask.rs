use std::ops::Range;

use num_complex::Complex64;

use super::ClusterResult;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::signal::{AudioBuffer, Spectrogram};

/// A partition of a TF region into `k` binary masks, stored as the owning
/// speaker of each bin. Every bin belongs to exactly one mask by
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    k: usize,
    frames: Range<usize>,
    freqs: usize,
    owner: Vec<u8>,
}

impl Mask {
    pub fn from_owner(
        k: usize,
        frames: Range<usize>,
        freqs: usize,
        owner: Vec<u8>,
    ) -> Result<Self> {
        if k == 0 || k > u8::MAX as usize {
            return Err(Error::InvalidClusterCount(k));
        }
        if owner.len() != frames.len() * freqs {
            return Err(Error::ShapeMismatch(format!(
                "{} owners for {} frames x {freqs} bins",
                owner.len(),
                frames.len()
            )));
        }
        if let Some(bad) = owner.iter().find(|&&o| o as usize >= k) {
            return Err(Error::ShapeMismatch(format!(
                "owner {bad} with only {k} masks"
            )));
        }
        Ok(Mask {
            k,
            frames,
            freqs,
            owner,
        })
    }

    /// Builds the partition from explicit binary masks, rejecting overlaps
    /// and holes.
    pub fn from_binary(frames: Range<usize>, freqs: usize, masks: &[Vec<bool>]) -> Result<Self> {
        let n = frames.len() * freqs;
        if masks.iter().any(|m| m.len() != n) {
            return Err(Error::ShapeMismatch("binary masks differ in size".into()));
        }
        let mut owner = vec![0u8; n];
        for (i, o) in owner.iter_mut().enumerate() {
            let on: Vec<usize> = (0..masks.len()).filter(|&k| masks[k][i]).collect();
            if on.len() != 1 {
                return Err(Error::ShapeMismatch(format!(
                    "bin {i} is covered by {} masks, expected exactly one",
                    on.len()
                )));
            }
            *o = on[0] as u8;
        }
        Mask::from_owner(masks.len(), frames, freqs, owner)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn frames(&self) -> Range<usize> {
        self.frames.clone()
    }

    pub fn freqs(&self) -> usize {
        self.freqs
    }

    pub fn owner(&self) -> &[u8] {
        &self.owner
    }

    /// Owner of absolute frame `t`, bin `f`.
    pub fn owner_at(&self, t: usize, f: usize) -> usize {
        self.owner[(t - self.frames.start) * self.freqs + f] as usize
    }

    pub fn binary(&self, k: usize) -> Vec<bool> {
        self.owner.iter().map(|&o| o as usize == k).collect()
    }

    /// Relabels owners: bin owned by `j` becomes owned by `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Mask {
        Mask {
            owner: self.owner.iter().map(|&o| perm[o as usize] as u8).collect(),
            ..self.clone()
        }
    }
}

pub fn masks_from_labels(c: &ClusterResult) -> Result<Mask> {
    Mask::from_owner(
        c.k,
        c.frames.clone(),
        c.freqs,
        c.labels.iter().map(|&l| l as u8).collect(),
    )
}

/// Masked copies of `spec`, one per speaker. Bins outside the mask's frame
/// range are zero.
pub fn masked_spectrograms(spec: &Spectrogram, mask: &Mask) -> Result<Vec<Spectrogram>> {
    if mask.freqs != spec.freqs() || mask.frames.end > spec.frames() {
        return Err(Error::ShapeMismatch(format!(
            "mask over frames {:?} x {} bins does not fit a {}x{} spectrogram",
            mask.frames,
            mask.freqs,
            spec.frames(),
            spec.freqs()
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    Ok((0..mask.k)
        .map(|k| {
            let mut out = Spectrogram::zeros(spec.frames(), *spec.params(), spec.sample_rate());
            for t in mask.frames.clone() {
                let src = spec.frame(t);
                let dst = out.frame_mut(t);
                for f in 0..spec.freqs() {
                    dst[f] = if mask.owner_at(t, f) == k {
                        src[f]
                    } else {
                        zero
                    };
                }
            }
            out
        })
        .collect())
}

/// Applies the masks and resynthesises each track at `out_len` samples
/// from the frames the mask covers.
pub fn apply_masks(
    spec: &Spectrogram,
    mask: &Mask,
    out_len: usize,
    exec: Exec,
) -> Result<Vec<AudioBuffer>> {
    masked_spectrograms(spec, mask)?
        .iter()
        .map(|s| s.istft_frames_with(mask.frames(), out_len, exec))
        .collect()
}
