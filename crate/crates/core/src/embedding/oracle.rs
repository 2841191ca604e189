//! Reference masks and embeddings built from the premixed stems.

use rand_distr::{Distribution, Normal};

use super::{EmbeddingTensor, Mask};
use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::signal::Spectrogram;

/// Assigns each bin to the stem with the largest magnitude; ties go to the
/// lowest stem index.
pub fn ideal_binary_mask(stems: &[Spectrogram]) -> Result<Mask> {
    let first = stems.first().ok_or(Error::InvalidClusterCount(0))?;
    if stems.iter().any(|s| !s.same_shape(first)) {
        return Err(Error::ShapeMismatch(
            "stem spectrograms differ in shape".into(),
        ));
    }
    let n = first.frames() * first.freqs();
    let owner = (0..n)
        .map(|i| {
            let mut best = (0u8, f64::NEG_INFINITY);
            for (k, s) in stems.iter().enumerate() {
                let m = s.data()[i].norm();
                if m > best.1 {
                    best = (k as u8, m);
                }
            }
            best.0
        })
        .collect();
    Mask::from_owner(stems.len(), 0..first.frames(), first.freqs(), owner)
}

/// Ideal embeddings: the one-hot vector of the dominant stem plus i.i.d.
/// Gaussian noise of standard deviation `sigma` per component.
pub fn oracle_embeddings(
    stems: &[Spectrogram],
    dim: usize,
    sigma: f64,
    seed: u64,
) -> Result<EmbeddingTensor> {
    if stems.len() > dim {
        return Err(Error::TooManySpeakers {
            k: stems.len(),
            dim,
        });
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParams(format!("noise sigma {sigma}")));
    }
    let mask = ideal_binary_mask(stems)?;
    let mut rng = seeded(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut values = Vec::with_capacity(mask.owner().len() * dim);
    for &o in mask.owner() {
        for j in 0..dim {
            let base = if j == o as usize { 1.0 } else { 0.0 };
            let e = if sigma > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            values.push((base + e) as f32);
        }
    }
    EmbeddingTensor::new(mask.frames().len(), mask.freqs(), dim, values)
}

/// Bins whose mixture magnitude is more than `below_max_db` under the
/// loudest bin; these can be left out of clustering.
pub fn silence_bins(spec: &Spectrogram, below_max_db: f64) -> Vec<bool> {
    let max = spec.data().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let floor = max * 10f64.powf(-below_max_db.abs() / 20.0);
    spec.data().iter().map(|c| c.norm() < floor).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::StftParams;
    use num_complex::Complex64;

    fn spec_from(vals: &[f64]) -> Spectrogram {
        let mut s = Spectrogram::zeros(1, StftParams::separation(), 16000);
        for (i, v) in vals.iter().enumerate() {
            s.data_mut()[i] = Complex64::new(0.0, *v);
        }
        s
    }

    #[test]
    fn ibm_ties_go_low() {
        let a = spec_from(&[1.0, 0.5, 2.0]);
        let b = spec_from(&[1.0, 0.7, -3.0]);
        let m = ideal_binary_mask(&[a, b]).unwrap();
        assert_eq!(&m.owner()[..3], &[0, 1, 1]);
        // Remaining bins are all-zero ties.
        assert!(m.owner()[3..].iter().all(|&o| o == 0));
    }

    #[test]
    fn noiseless_oracle_is_one_hot() {
        let a = spec_from(&[1.0, 0.0]);
        let b = spec_from(&[0.0, 1.0]);
        let e = oracle_embeddings(&[a.clone(), b.clone()], 3, 0.0, 0).unwrap();
        assert_eq!(e.vector(0, 0), &[1.0, 0.0, 0.0]);
        assert_eq!(e.vector(0, 1), &[0.0, 1.0, 0.0]);
        assert!(matches!(
            oracle_embeddings(&[a, b], 1, 0.0, 0),
            Err(Error::TooManySpeakers { k: 2, dim: 1 })
        ));
    }

    #[test]
    fn noisy_oracle_statistics() {
        let a = spec_from(&vec![1.0; 257]);
        let b = spec_from(&vec![0.0; 257]);
        let e = oracle_embeddings(&[a, b], 40, 0.3, 11).unwrap();
        let v: Vec<f64> = e.values().iter().map(|&x| x as f64).collect();
        let off: Vec<f64> = v.chunks(40).flat_map(|c| c[1..].to_vec()).collect();
        let mean = off.iter().sum::<f64>() / off.len() as f64;
        let var = off.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / off.len() as f64;
        assert!(mean.abs() < 0.01);
        assert!((var.sqrt() - 0.3).abs() < 0.01);
    }

    #[test]
    fn silence_threshold() {
        let s = spec_from(&[1.0, 0.1, 0.001]);
        let quiet = silence_bins(&s, 40.0);
        assert_eq!(&quiet[..3], &[false, false, true]);
    }
}
