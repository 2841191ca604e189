//! Constructed mixtures whose speakers occupy disjoint frequency bands.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::ops::Range;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparsemix_core::{ActivityTrack, AudioBuffer, Span};

pub const SR: u32 = 16_000;
const FADE: usize = 320;

pub struct Constructed {
    pub mixture: AudioBuffer,
    pub stems: [AudioBuffer; 2],
    pub activities: [ActivityTrack; 2],
}

/// A few steady tones inside `band`, switched on over `spans` with
/// raised-cosine fades.
pub fn banded_source(
    rng: &mut ChaCha8Rng,
    len: usize,
    band: (f64, f64),
    spans: &[Range<usize>],
) -> AudioBuffer {
    let tones: Vec<(f64, f64, f64)> = (0..5)
        .map(|_| {
            (
                rng.random_range(band.0..band.1),
                rng.random_range(0.3..1.0),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let mut x = vec![0.0; len];
    for s in spans {
        let n = s.len();
        for i in s.clone() {
            let k = i - s.start;
            let fade = FADE.min(n / 2);
            let env = if k < fade {
                0.5 - 0.5 * (PI * k as f64 / fade as f64).cos()
            } else if n - k <= fade {
                0.5 - 0.5 * (PI * (n - k) as f64 / fade as f64).cos()
            } else {
                1.0
            };
            let t = i as f64 / SR as f64;
            x[i] = env
                * tones
                    .iter()
                    .map(|(f, a, p)| a * (2.0 * PI * f * t + p).sin())
                    .sum::<f64>()
                * 0.05;
        }
    }
    AudioBuffer::new(x, SR).unwrap()
}

fn track(len: usize, spans: &[Range<usize>]) -> ActivityTrack {
    ActivityTrack::new(
        len,
        spans.iter().map(|r| Span::new(r.start, r.end)).collect(),
    )
    .unwrap()
}

/// Timeline of `slots` half-second slots, each owned by A, B or both.
/// Both speakers get at least one slot; `force_overlap` makes every slot
/// shared.
pub fn disjoint_mixture(seed: u64, slots: usize, force_overlap: bool) -> Constructed {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slot = SR as usize / 2;
    let len = slots * slot;
    let kinds: Vec<u8> = loop {
        let k: Vec<u8> = (0..slots)
            .map(|_| {
                if force_overlap {
                    2
                } else {
                    rng.random_range(0..3u8)
                }
            })
            .collect();
        if k.iter().any(|&v| v != 1) && k.iter().any(|&v| v != 0) {
            break k;
        }
    };
    let spans_for = |who: u8| -> Vec<Range<usize>> {
        let mut out: Vec<Range<usize>> = Vec::new();
        for (i, &k) in kinds.iter().enumerate() {
            if k == who || k == 2 {
                let r = i * slot..(i + 1) * slot;
                match out.last_mut() {
                    Some(last) if last.end == r.start => last.end = r.end,
                    _ => out.push(r),
                }
            }
        }
        out
    };
    let (sa, sb) = (spans_for(0), spans_for(1));
    let a = banded_source(&mut rng, len, (200.0, 1800.0), &sa);
    let b0 = banded_source(&mut rng, len, (3000.0, 6500.0), &sb);
    let b = b0.scaled((a.energy() / b0.energy()).sqrt());
    let mix = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| x + y)
        .collect();
    Constructed {
        mixture: AudioBuffer::new(mix, SR).unwrap(),
        activities: [track(len, &sa), track(len, &sb)],
        stems: [a, b],
    }
}
