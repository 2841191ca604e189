//! Masking, ideal-mask and oracle-embedding behaviour on constructed signals.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use sparsemix_core::embedding::{
    apply_masks, ideal_binary_mask, kmeans_embed, masks_from_labels, oracle_embeddings,
    ClusterResult, EmbeddingTensor, KMeansOptions, Mask,
};
use sparsemix_core::rng::seeded;
use sparsemix_core::signal::{istft, stft};
use sparsemix_core::{AudioBuffer, Exec, Spectrogram, StftParams};

const SR: u32 = 16_000;

fn tone(freq: f64, len: usize) -> AudioBuffer {
    AudioBuffer::new(
        (0..len)
            .map(|i| (2.0 * PI * freq * i as f64 / SR as f64).sin())
            .collect(),
        SR,
    )
    .unwrap()
}

fn noise(seed: u64, len: usize) -> AudioBuffer {
    let mut rng = seeded(seed);
    AudioBuffer::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), SR).unwrap()
}

fn add(a: &AudioBuffer, b: &AudioBuffer) -> AudioBuffer {
    AudioBuffer::new(
        a.samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| x + y)
            .collect(),
        SR,
    )
    .unwrap()
}

fn residual_db(est: &[f64], reference: &[f64]) -> f64 {
    let e: f64 = est
        .iter()
        .zip(reference)
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    let r: f64 = reference.iter().map(|y| y * y).sum();
    10.0 * (e / r).log10()
}

/// Fraction of bins where `labels` matches `truth`, maximised over the two
/// relabellings.
fn agreement(labels: &[usize], truth: &[u8]) -> f64 {
    let same = labels
        .iter()
        .zip(truth)
        .filter(|(l, t)| **l == **t as usize)
        .count();
    same.max(labels.len() - same) as f64 / labels.len() as f64
}

#[test]
fn two_tone_ideal_mask_separates_below_minus_60_db() {
    let len = SR as usize;
    let (a, b) = (tone(1000.0, len), tone(3000.0, len));
    let mix = add(&a, &b);
    let params = StftParams::separation();
    let specs = [stft(&a, &params).unwrap(), stft(&b, &params).unwrap()];
    let mix_spec = stft(&mix, &params).unwrap();
    let mask = ideal_binary_mask(&specs).unwrap();
    let tracks = apply_masks(&mix_spec, &mask, len, Exec::Sequential).unwrap();
    let r = mix_spec.interior();
    for (t, s) in tracks.iter().zip([&a, &b]) {
        let db = residual_db(&t.samples()[r.clone()], &s.samples()[r.clone()]);
        assert!(db < -60.0, "residual {db:.1} dB");
    }
}

#[test]
fn all_ones_mask_reproduces_the_mixture() {
    let x = noise(3, 8000);
    let spec = stft(&x, &StftParams::separation()).unwrap();
    let mask = Mask::from_owner(
        2,
        0..spec.frames(),
        spec.freqs(),
        vec![0; spec.frames() * spec.freqs()],
    )
    .unwrap();
    assert!(mask.binary(0).iter().all(|&b| b));
    assert!(mask.binary(1).iter().all(|&b| !b));
    let tracks = apply_masks(&spec, &mask, x.len(), Exec::Sequential).unwrap();
    assert_eq!(tracks[0], istft(&spec, x.len()).unwrap());
    assert!(tracks[1].samples().iter().all(|&v| v == 0.0));
}

#[test]
fn checkerboard_masks_are_complementary() {
    let (frames, freqs) = (7, 9);
    let owner: Vec<u8> = (0..frames * freqs)
        .map(|i| (((i / freqs) + (i % freqs)) % 2) as u8)
        .collect();
    let mask = Mask::from_owner(2, 0..frames, freqs, owner).unwrap();
    let (m0, m1) = (mask.binary(0), mask.binary(1));
    for t in 0..frames {
        for f in 0..freqs {
            let i = t * freqs + f;
            assert_eq!(m0[i], (t + f) % 2 == 0);
            assert_ne!(m0[i], m1[i]);
        }
    }
}

#[test]
fn dominant_stem_takes_every_bin() {
    let params = StftParams::separation();
    let b = noise(5, 6000);
    let a = b.scaled(2.0);
    let mask =
        ideal_binary_mask(&[stft(&a, &params).unwrap(), stft(&b, &params).unwrap()]).unwrap();
    assert!(mask.owner().iter().all(|&o| o == 0));
}

#[test]
fn disjoint_supports_give_their_own_masks() {
    let params = StftParams::separation();
    let frames = 6;
    let mut s0 = Spectrogram::zeros(frames, params, SR);
    let mut s1 = Spectrogram::zeros(frames, params, SR);
    let freqs = s0.freqs();
    let mut rng = seeded(8);
    let mut expect = vec![0u8; frames * freqs];
    for t in 0..frames {
        for f in 0..freqs {
            match rng.random_range(0..3) {
                0 => s0.frame_mut(t)[f].re = 1.0,
                1 => {
                    s1.frame_mut(t)[f].re = 1.0;
                    expect[t * freqs + f] = 1;
                }
                _ => {}
            }
        }
    }
    assert_eq!(ideal_binary_mask(&[s0, s1]).unwrap().owner(), &expect[..]);
}

#[test]
fn single_stem_embeddings_sit_at_the_first_axis() {
    let spec = stft(&noise(1, 4000), &StftParams::separation()).unwrap();
    let e = oracle_embeddings(std::slice::from_ref(&spec), 4, 0.0, 0).unwrap();
    for t in 0..e.frames() {
        for f in 0..e.freqs() {
            assert_eq!(e.vector(t, f), &[1.0, 0.0, 0.0, 0.0]);
        }
    }
}

#[test]
fn two_blobs_are_recovered_over_50_seeds() {
    let n = 500;
    for seed in 0..50u64 {
        let mut rng = seeded(seed);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let centres = [[0.0f64, 0.0], [0.6, 0.8]];
        let mut values = Vec::with_capacity(2 * n * 2);
        let mut truth = Vec::with_capacity(2 * n);
        for i in 0..2 * n {
            let c = (i % 2) as u8;
            truth.push(c);
            for v in centres[c as usize] {
                values.push((v + noise.sample(&mut rng)) as f32);
            }
        }
        let emb = EmbeddingTensor::new(1, 2 * n, 2, values).unwrap();
        let r = kmeans_embed(
            &emb,
            2,
            None,
            &KMeansOptions {
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(agreement(&r.labels, &truth) >= 0.999, "seed {seed}");
    }
}

fn chain(specs: &[Spectrogram; 2], sigma: f64, seed: u64) -> (ClusterResult, Mask) {
    let emb = oracle_embeddings(specs, 40, sigma, seed).unwrap();
    let r = kmeans_embed(
        &emb,
        2,
        None,
        &KMeansOptions {
            seed,
            ..Default::default()
        },
    )
    .unwrap();
    (r, ideal_binary_mask(specs).unwrap())
}

#[test]
fn slightly_noisy_oracle_chain_agrees_with_the_ideal_mask() {
    let params = StftParams::separation();
    for seed in 0..10u64 {
        let specs = [
            stft(&noise(100 + seed, 8000), &params).unwrap(),
            stft(&noise(200 + seed, 8000), &params).unwrap(),
        ];
        let (r, ibm) = chain(&specs, 0.01, seed);
        assert!(agreement(&r.labels, ibm.owner()) >= 0.999, "seed {seed}");
    }
}

#[test]
fn noise_free_chain_masks_match_exactly() {
    let params = StftParams::separation();
    let specs = [
        stft(&noise(1, 8000), &params).unwrap(),
        stft(&noise(2, 8000), &params).unwrap(),
    ];
    let (r, ibm) = chain(&specs, 0.0, 4);
    let mask = masks_from_labels(&r).unwrap();
    let same = mask.owner() == ibm.owner();
    let flipped = mask.permuted(&[1, 0]).owner() == ibm.owner();
    assert!(same || flipped);
}
