use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::AudioBuffer;

/// Scores are clamped to ±this so that perfect or empty reconstructions
/// keep means finite.
pub const SDR_CAP_DB: f64 = 100.0;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::LengthMismatch(format!(
            "reference has {} samples, estimate {}",
            reference.len(),
            estimate.len()
        )));
    }
    let e = reference.energy();
    if e <= 0.0 {
        return Err(Error::SilentReference);
    }
    Ok(e)
}

fn ratio_db(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        return if num > 0.0 { SDR_CAP_DB } else { -SDR_CAP_DB };
    }
    if num <= 0.0 {
        return -SDR_CAP_DB;
    }
    (10.0 * (num / den).log10()).clamp(-SDR_CAP_DB, SDR_CAP_DB)
}

/// Scale-invariant SDR: the estimate is projected onto the reference and
/// the projection is compared with the residual. No mean removal.
pub fn si_sdr(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<f64> {
    let e_ref = check(reference, estimate)?;
    let (s, x) = (reference.samples(), estimate.samples());
    let alpha = dot(x, s) / e_ref;
    let mut target = 0.0;
    let mut resid = 0.0;
    for (si, xi) in s.iter().zip(x) {
        let t = alpha * si;
        target += t * t;
        resid += (xi - t) * (xi - t);
    }
    Ok(ratio_db(target, resid))
}

/// Plain SDR `10·log10(|s|² / |s − ŝ|²)`.
pub fn sdr(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<f64> {
    let e_ref = check(reference, estimate)?;
    let err: f64 = reference
        .samples()
        .iter()
        .zip(estimate.samples())
        .map(|(s, x)| (s - x) * (s - x))
        .sum();
    Ok(ratio_db(e_ref, err))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackScore {
    pub stem: usize,
    pub track: usize,
    pub si_sdr_db: f64,
    pub sdr_db: f64,
    pub si_sdr_improvement_db: f64,
    pub sdr_improvement_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationScore {
    /// One entry per stem, in stem order.
    pub tracks: Vec<TrackScore>,
    /// `pairing[stem] = track`.
    pub pairing: Vec<usize>,
}

impl SeparationScore {
    pub fn mean_si_sdr_improvement(&self) -> f64 {
        self.tracks
            .iter()
            .map(|t| t.si_sdr_improvement_db)
            .sum::<f64>()
            / self.tracks.len() as f64
    }

    pub fn mean_sdr_improvement(&self) -> f64 {
        self.tracks
            .iter()
            .map(|t| t.sdr_improvement_db)
            .sum::<f64>()
            / self.tracks.len() as f64
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Evaluates every stem↔track bijection and keeps the one with the largest
/// SI-SDR sum (ties go to the lexicographically first pairing).
pub fn score_separation(
    stems: &[AudioBuffer],
    tracks: &[AudioBuffer],
    mixture: &AudioBuffer,
) -> Result<SeparationScore> {
    if stems.len() != tracks.len() || stems.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} stems but {} tracks",
            stems.len(),
            tracks.len()
        )));
    }
    let n = stems.len();
    let mut si = vec![vec![0.0; n]; n];
    let mut pl = vec![vec![0.0; n]; n];
    for (s, stem) in stems.iter().enumerate() {
        for (t, track) in tracks.iter().enumerate() {
            si[s][t] = si_sdr(stem, track)?;
            pl[s][t] = sdr(stem, track)?;
        }
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for p in permutations(n) {
        let score: f64 = (0..n).map(|s| si[s][p[s]]).sum();
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, p));
        }
    }
    let pairing = best.unwrap().1;
    let tracks = (0..n)
        .map(|s| {
            let t = pairing[s];
            let base_si = si_sdr(&stems[s], mixture)?;
            let base_sdr = sdr(&stems[s], mixture)?;
            Ok(TrackScore {
                stem: s,
                track: t,
                si_sdr_db: si[s][t],
                sdr_db: pl[s][t],
                si_sdr_improvement_db: si[s][t] - base_si,
                sdr_improvement_db: pl[s][t] - base_sdr,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SeparationScore { tracks, pairing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn buf(v: Vec<f64>) -> AudioBuffer {
        AudioBuffer::new(v, 8000).unwrap()
    }

    fn random(n: usize, seed: u64) -> AudioBuffer {
        let mut rng = seeded(seed);
        buf((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    /// Correlation form: SI-SDR = 10·log10(ρ² / (1 − ρ²)).
    fn oracle(s: &[f64], x: &[f64]) -> f64 {
        let rho = dot(s, x) / (dot(s, s) * dot(x, x)).sqrt();
        10.0 * (rho * rho / (1.0 - rho * rho)).log10()
    }

    #[test]
    fn perfect_and_orthogonal() {
        let s = buf(vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(si_sdr(&s, &s).unwrap(), SDR_CAP_DB);
        assert_eq!(si_sdr(&s, &s.scaled(-3.0)).unwrap(), SDR_CAP_DB);
        let noisy = buf(vec![1.0, 1.0, 1.0, -1.0]);
        // Orthogonal noise [0,1,0,-1] carries the same energy as s.
        assert!(si_sdr(&s, &noisy).unwrap().abs() < 1e-12);
        assert_eq!(si_sdr(&s, &buf(vec![0.0; 4])).unwrap(), -SDR_CAP_DB);
        assert!(matches!(
            si_sdr(&buf(vec![0.0; 4]), &s),
            Err(Error::SilentReference)
        ));
        assert!(matches!(
            si_sdr(&s, &buf(vec![0.0; 3])),
            Err(Error::LengthMismatch(_))
        ));
    }

    #[test]
    fn matches_correlation_oracle() {
        for seed in 0..50 {
            let s = random(500, seed);
            let x = random(500, seed + 1000);
            let mix: Vec<f64> = s
                .samples()
                .iter()
                .zip(x.samples())
                .map(|(a, b)| a + 0.5 * b)
                .collect();
            let est = buf(mix);
            let got = si_sdr(&s, &est).unwrap();
            assert!((got - oracle(s.samples(), est.samples())).abs() < 1e-9);
        }
    }

    #[test]
    fn plain_sdr_is_not_scale_invariant() {
        let s = random(100, 1);
        assert_eq!(sdr(&s, &s).unwrap(), SDR_CAP_DB);
        // Half the signal leaves an error of a quarter of the energy.
        assert!((sdr(&s, &s.scaled(0.5)).unwrap() - 10.0 * 4f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn swapped_tracks_and_mixture_baseline() {
        let a = random(400, 2);
        let b = random(400, 3);
        let mix = buf(a
            .samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| x + y)
            .collect());
        let sc = score_separation(&[a.clone(), b.clone()], &[b.clone(), a.clone()], &mix).unwrap();
        assert_eq!(sc.pairing, vec![1, 0]);
        assert!(sc.tracks.iter().all(|t| t.si_sdr_db == SDR_CAP_DB));
        let sc =
            score_separation(&[a.clone(), b.clone()], &[mix.clone(), mix.clone()], &mix).unwrap();
        assert!(sc
            .tracks
            .iter()
            .all(|t| t.si_sdr_improvement_db == 0.0 && t.sdr_improvement_db == 0.0));
    }

    proptest! {
        #[test]
        fn scale_invariance(seed in any::<u64>(), alpha in prop_oneof![-50.0f64..-1e-3, 1e-3f64..50.0]) {
            let s = random(256, seed);
            let x = random(256, seed ^ 0x5555);
            let est = buf(s.samples().iter().zip(x.samples()).map(|(a, b)| a + b).collect());
            let d = si_sdr(&s, &est).unwrap() - si_sdr(&s, &est.scaled(alpha)).unwrap();
            prop_assert!(d.abs() < 1e-9);
        }

        #[test]
        fn track_order_does_not_change_scores(seed in any::<u64>()) {
            let a = random(200, seed);
            let b = random(200, seed.wrapping_add(1));
            let mix = buf(a.samples().iter().zip(b.samples()).map(|(x, y)| x + y).collect());
            let t0 = buf(a.samples().iter().zip(b.samples()).map(|(x, y)| x + 0.3 * y).collect());
            let t1 = buf(a.samples().iter().zip(b.samples()).map(|(x, y)| 0.2 * x + y).collect());
            let s1 = score_separation(&[a.clone(), b.clone()], &[t0.clone(), t1.clone()], &mix).unwrap();
            let s2 = score_separation(&[a, b], &[t1, t0], &mix).unwrap();
            for (x, y) in s1.tracks.iter().zip(&s2.tracks) {
                prop_assert_eq!(x.si_sdr_db, y.si_sdr_db);
                prop_assert_eq!(x.si_sdr_improvement_db, y.si_sdr_improvement_db);
            }
        }
    }
}
