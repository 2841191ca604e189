//! Soft k-means over embedding vectors.
//!
//! Responsibilities are `softmax(-β·d²)` over the centroids; the M-step is
//! the responsibility-weighted mean. The recorded objective is the soft
//! free energy `F = -1/β Σ_n log Σ_k exp(-β d²_nk)`, which the EM updates
//! never increase.

use std::ops::Range;

use rand::Rng;

use super::EmbeddingTensor;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::seeded;

const POINT_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy)]
pub struct KMeansOptions {
    pub max_iters: usize,
    /// β in the softmax; larger values approach hard k-means.
    pub stiffness: f64,
    /// Stop once the relative objective change drops below this.
    pub tol: f64,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            max_iters: 20,
            stiffness: 50.0,
            tol: 1e-6,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub k: usize,
    /// Frame range of the tensor that was clustered.
    pub frames: Range<usize>,
    pub freqs: usize,
    /// Hard label (nearest centroid) per bin of the region, frame-major.
    pub labels: Vec<usize>,
    /// `labels.len() × k` responsibilities under the final centroids.
    pub soft: Vec<f64>,
    pub centroids: Vec<Vec<f64>>,
    /// Objective at the initial centroids and after every update.
    pub history: Vec<f64>,
    /// Final hard inertia `Σ_n min_k d²_nk` over the fitted points.
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ClusterResult {
    pub fn soft_row(&self, n: usize) -> &[f64] {
        &self.soft[n * self.k..(n + 1) * self.k]
    }
}

/// Clusters every bin of `frames` (all frames when `None`).
pub fn kmeans_embed(
    emb: &EmbeddingTensor,
    k: usize,
    frames: Option<Range<usize>>,
    opts: &KMeansOptions,
) -> Result<ClusterResult> {
    kmeans_embed_masked(emb, k, frames, None, opts)
}

/// Like [`kmeans_embed`], but only bins with `include[n]` set take part in
/// fitting. Excluded bins still receive labels from the final centroids.
pub fn kmeans_embed_masked(
    emb: &EmbeddingTensor,
    k: usize,
    frames: Option<Range<usize>>,
    include: Option<&[bool]>,
    opts: &KMeansOptions,
) -> Result<ClusterResult> {
    if k == 0 {
        return Err(Error::InvalidClusterCount(k));
    }
    let frames = frames.unwrap_or(0..emb.frames());
    if frames.start > frames.end || frames.end > emb.frames() {
        return Err(Error::ShapeMismatch(format!(
            "frame range {frames:?} outside {} frames",
            emb.frames()
        )));
    }
    let d = emb.dim();
    let base = frames.start * emb.freqs() * d;
    let region = &emb.values()[base..frames.end * emb.freqs() * d];
    let n_bins = region.len() / d;
    if let Some(inc) = include {
        if inc.len() != n_bins {
            return Err(Error::ShapeMismatch(format!(
                "inclusion mask has {} entries for {n_bins} bins",
                inc.len()
            )));
        }
    }
    let all: Vec<f64> = region.iter().map(|&v| v as f64).collect();
    let points: Vec<f64> = match include {
        None => all.clone(),
        Some(inc) => all
            .chunks_exact(d)
            .zip(inc)
            .filter(|(_, &keep)| keep)
            .flat_map(|(p, _)| p.iter().copied())
            .collect(),
    };
    let n = points.len() / d;
    let found = count_distinct(&points, d, k);
    if found < k {
        return Err(Error::TooFewPoints { k, found });
    }

    let mut centroids = kmeans_pp(&points, d, k, opts);
    let beta = opts.stiffness;
    let mut history = Vec::new();
    let mut stats = e_step(&points, d, &centroids, beta, opts.exec);
    history.push(stats.objective);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        let next = m_step(&stats, &centroids, d);
        let next_stats = e_step(&points, d, &next, beta, opts.exec);
        iterations += 1;
        let prev = stats.objective;
        let cur = next_stats.objective;
        // Rounding can lift the objective by a few ulps at a fixed point;
        // treat that as convergence and keep the previous centroids. Any
        // larger increase is recorded as is.
        if cur > prev && cur - prev <= 1e-12 * prev.abs() {
            converged = true;
            break;
        }
        centroids = next;
        stats = next_stats;
        history.push(cur);
        if (prev - cur).abs() <= opts.tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    debug_assert!(n > 0);

    let (labels, soft, _) = assign(&all, d, &centroids, beta, opts.exec);
    let inertia = stats.hard_inertia;
    Ok(ClusterResult {
        k,
        frames,
        freqs: emb.freqs(),
        labels,
        soft,
        centroids,
        history,
        inertia,
        iterations,
        converged,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn count_distinct(points: &[f64], d: usize, cap: usize) -> usize {
    let mut seen: Vec<&[f64]> = Vec::new();
    for p in points.chunks_exact(d) {
        if !seen.contains(&p) {
            seen.push(p);
            if seen.len() >= cap {
                break;
            }
        }
    }
    seen.len()
}

/// k-means++ seeding. Chunk sums are computed in parallel and the sampled
/// point is located by a sequential scan, so the seed alone fixes the result.
fn kmeans_pp(points: &[f64], d: usize, k: usize, opts: &KMeansOptions) -> Vec<Vec<f64>> {
    let n = points.len() / d;
    let mut rng = seeded(opts.seed);
    let first = rng.random_range(0..n);
    let mut centroids = vec![points[first * d..(first + 1) * d].to_vec()];
    let mut best: Vec<f64> = points
        .chunks_exact(d)
        .map(|p| sq_dist(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let sums = opts
            .exec
            .map_chunks(n, POINT_CHUNK, |r| best[r].iter().sum::<f64>());
        let total: f64 = sums.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = None;
            'outer: for (c, s) in sums.iter().enumerate() {
                if u >= *s {
                    u -= s;
                    continue;
                }
                let start = c * POINT_CHUNK;
                for (i, &b) in best
                    .iter()
                    .enumerate()
                    .take((start + POINT_CHUNK).min(n))
                    .skip(start)
                {
                    if u < b {
                        chosen = Some(i);
                        break 'outer;
                    }
                    u -= b;
                }
            }
            // Rounding can leave u just past the end; take the last
            // candidate with positive weight.
            chosen.unwrap_or_else(|| best.iter().rposition(|&b| b > 0.0).unwrap())
        } else {
            unreachable!("distinct-point check guarantees positive mass")
        };
        let c = points[pick * d..(pick + 1) * d].to_vec();
        let cref = &c;
        let updated = opts.exec.map_chunks(n, POINT_CHUNK, |r| {
            r.map(|i| best[i].min(sq_dist(&points[i * d..(i + 1) * d], cref)))
                .collect::<Vec<_>>()
        });
        best = updated.into_iter().flatten().collect();
        centroids.push(c);
    }
    centroids
}

struct Stats {
    weight: Vec<f64>,
    sums: Vec<f64>,
    objective: f64,
    hard_inertia: f64,
}

/// Responsibilities of one point, written into `r`; returns the point's
/// free-energy term and its minimum squared distance.
fn responsibilities(p: &[f64], centroids: &[Vec<f64>], beta: f64, r: &mut [f64]) -> (f64, f64) {
    let mut dmin = f64::INFINITY;
    for (k, c) in centroids.iter().enumerate() {
        r[k] = sq_dist(p, c);
        dmin = dmin.min(r[k]);
    }
    let mut z = 0.0;
    for v in r.iter_mut() {
        *v = (-beta * (*v - dmin)).exp();
        z += *v;
    }
    for v in r.iter_mut() {
        *v /= z;
    }
    (dmin - z.ln() / beta, dmin)
}

fn e_step(points: &[f64], d: usize, centroids: &[Vec<f64>], beta: f64, exec: Exec) -> Stats {
    let k = centroids.len();
    let n = points.len() / d;
    let partials = exec.map_chunks(n, POINT_CHUNK, |range| {
        let mut s = Stats {
            weight: vec![0.0; k],
            sums: vec![0.0; k * d],
            objective: 0.0,
            hard_inertia: 0.0,
        };
        let mut r = vec![0.0; k];
        for i in range {
            let p = &points[i * d..(i + 1) * d];
            let (f, dmin) = responsibilities(p, centroids, beta, &mut r);
            s.objective += f;
            s.hard_inertia += dmin;
            for (j, &rj) in r.iter().enumerate() {
                if rj == 0.0 {
                    continue;
                }
                s.weight[j] += rj;
                for (acc, x) in s.sums[j * d..(j + 1) * d].iter_mut().zip(p) {
                    *acc += rj * x;
                }
            }
        }
        s
    });
    let mut total = Stats {
        weight: vec![0.0; k],
        sums: vec![0.0; k * d],
        objective: 0.0,
        hard_inertia: 0.0,
    };
    for s in partials {
        total.objective += s.objective;
        total.hard_inertia += s.hard_inertia;
        for (a, b) in total.weight.iter_mut().zip(&s.weight) {
            *a += b;
        }
        for (a, b) in total.sums.iter_mut().zip(&s.sums) {
            *a += b;
        }
    }
    total
}

fn m_step(stats: &Stats, old: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    old.iter()
        .enumerate()
        .map(|(j, c)| {
            let w = stats.weight[j];
            if w > 0.0 {
                stats.sums[j * d..(j + 1) * d]
                    .iter()
                    .map(|s| s / w)
                    .collect()
            } else {
                c.clone()
            }
        })
        .collect()
}

fn assign(
    points: &[f64],
    d: usize,
    centroids: &[Vec<f64>],
    beta: f64,
    exec: Exec,
) -> (Vec<usize>, Vec<f64>, f64) {
    let k = centroids.len();
    let n = points.len() / d;
    let parts = exec.map_chunks(n, POINT_CHUNK, |range| {
        let mut labels = Vec::with_capacity(range.len());
        let mut soft = vec![0.0; range.len() * k];
        let mut inertia = 0.0;
        for (j, i) in range.enumerate() {
            let p = &points[i * d..(i + 1) * d];
            let mut best = (0, f64::INFINITY);
            for (c, cent) in centroids.iter().enumerate() {
                let dist = sq_dist(p, cent);
                if dist < best.1 {
                    best = (c, dist);
                }
            }
            labels.push(best.0);
            inertia += best.1;
            responsibilities(p, centroids, beta, &mut soft[j * k..(j + 1) * k]);
        }
        (labels, soft, inertia)
    });
    let mut labels = Vec::with_capacity(n);
    let mut soft = Vec::with_capacity(n * k);
    let mut inertia = 0.0;
    for (l, s, i) in parts {
        labels.extend(l);
        soft.extend(s);
        inertia += i;
    }
    (labels, soft, inertia)
}
