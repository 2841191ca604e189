use rand::Rng;
use serde::{Deserialize, Serialize};

use super::overlap::OverlapMeasure;
use super::render::GapFill;
use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::signal::{ActivityTrack, Span};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanConstraints {
    pub max_no_speech: f64,
    pub tol: f64,
    /// Smallest silence gap between consecutive utterances of one track, samples.
    pub min_gap: usize,
    pub max_gap: Option<usize>,
    pub measure: OverlapMeasure,
    pub max_attempts: usize,
}

impl Default for PlanConstraints {
    fn default() -> Self {
        PlanConstraints {
            max_no_speech: 0.10,
            tol: 0.01,
            min_gap: 0,
            max_gap: None,
            measure: OverlapMeasure::Union,
            max_attempts: 100,
        }
    }
}

/// Placement of one speaker's utterances on the mixture timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPlan {
    pub utterance_ids: Vec<String>,
    pub start_offsets: Vec<usize>,
    pub lengths: Vec<usize>,
    #[serde(default)]
    pub gap_fills: Vec<GapFill>,
}

impl TrackPlan {
    pub fn spans(&self) -> Vec<Span> {
        self.start_offsets
            .iter()
            .zip(&self.lengths)
            .map(|(&o, &l)| Span::new(o, o + l))
            .collect()
    }

    pub fn activity(&self, timeline_len: usize) -> Result<ActivityTrack> {
        ActivityTrack::new(timeline_len, self.spans())
    }

    pub fn speech_len(&self) -> usize {
        self.lengths.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPair {
    pub a: TrackPlan,
    pub b: TrackPlan,
    /// Start of track B relative to track A, samples.
    pub relative_shift: i64,
    pub timeline_len: usize,
    pub achieved_overlap: f64,
    pub no_speech_ratio: f64,
    pub attempts: usize,
}

struct Layout {
    spans: Vec<(i64, i64)>,
    extent: i64,
    speech: i64,
}

impl Layout {
    fn new(lengths: &[usize], gaps: &[usize]) -> Layout {
        let mut spans = Vec::with_capacity(lengths.len());
        let mut pos = 0i64;
        for (i, &l) in lengths.iter().enumerate() {
            if i > 0 {
                pos += gaps[i - 1] as i64;
            }
            spans.push((pos, pos + l as i64));
            pos += l as i64;
        }
        Layout {
            spans,
            extent: pos,
            speech: lengths.iter().sum::<usize>() as i64,
        }
    }
}

#[derive(Clone, Copy)]
struct Eval {
    ratio: f64,
    no_speech: f64,
}

struct Search<'a> {
    a: &'a Layout,
    b: &'a Layout,
    target: f64,
    c: &'a PlanConstraints,
}

impl Search<'_> {
    fn counts(&self, d: i64) -> (i64, i64, i64) {
        let inter: i64 = self
            .a
            .spans
            .iter()
            .flat_map(|&(as_, ae)| {
                self.b
                    .spans
                    .iter()
                    .map(move |&(bs, be)| (ae.min(be + d) - as_.max(bs + d)).max(0))
            })
            .sum();
        let union = self.a.speech + self.b.speech - inter;
        let timeline = self.a.extent.max(self.b.extent + d) - d.min(0);
        (inter, union, timeline)
    }

    fn eval(&self, d: i64) -> Eval {
        let (i, u, t) = self.counts(d);
        Eval {
            ratio: self.c.measure.ratio(i as usize, u as usize, t as usize),
            no_speech: if t == 0 {
                0.0
            } else {
                1.0 - u as f64 / t as f64
            },
        }
    }

    /// Signed distance from the target, linear between breakpoints.
    fn residual(&self, d: i64) -> f64 {
        let (i, u, t) = self.counts(d);
        let den = match self.c.measure {
            OverlapMeasure::Union => u,
            OverlapMeasure::MixtureLength => t,
        };
        i as f64 - self.target * den as f64
    }

    fn hits_overlap(&self, e: Eval) -> bool {
        (e.ratio - self.target).abs() <= self.c.tol
    }

    fn ok(&self, e: Eval) -> bool {
        self.hits_overlap(e) && e.no_speech <= self.c.max_no_speech
    }

    fn breakpoints(&self) -> Vec<i64> {
        let (lo, hi) = (-self.b.extent, self.a.extent);
        let mut pts = vec![lo, hi, 0, self.a.extent - self.b.extent];
        for &(as_, ae) in &self.a.spans {
            for &(bs, be) in &self.b.spans {
                pts.extend([as_ - be, as_ - bs, ae - be, ae - bs]);
            }
        }
        pts.retain(|p| (lo..=hi).contains(p));
        pts.sort_unstable();
        pts.dedup();
        pts
    }

    /// Shifts satisfying every constraint, and whether any shift reached the
    /// overlap tolerance at all.
    fn candidates(&self, rng: &mut impl Rng) -> (Vec<i64>, bool) {
        let pts = self.breakpoints();
        let mut out = Vec::new();
        let mut reached = false;
        let mut consider = |d: i64, out: &mut Vec<i64>| {
            let e = self.eval(d);
            reached |= self.hits_overlap(e);
            if self.ok(e) {
                out.push(d);
            }
        };
        for w in pts.windows(2) {
            let (d0, d1) = (w[0], w[1]);
            consider(d0, &mut out);
            let (g0, g1) = (self.residual(d0), self.residual(d1));
            if g0 * g1 < 0.0 {
                let root = d0 as f64 + g0 * (d1 - d0) as f64 / (g0 - g1);
                for d in [root.floor() as i64, root.ceil() as i64] {
                    if d > d0 && d < d1 {
                        consider(d, &mut out);
                    }
                }
            }
            if d1 - d0 > 1 && self.ok(self.eval(d0)) && self.ok(self.eval(d1)) {
                consider(rng.random_range(d0 + 1..d1), &mut out);
            }
        }
        if let Some(&last) = pts.last() {
            consider(last, &mut out);
        }
        out.sort_unstable();
        out.dedup();
        (out, reached)
    }
}

fn max_ratio(sa: usize, sb: usize, measure: OverlapMeasure) -> f64 {
    let (lo, hi) = (sa.min(sb), sa.max(sb));
    measure.ratio(lo, hi, hi)
}

struct Outcome {
    plan: Option<PlannedPair>,
    reached_overlap: bool,
}

fn search(
    utts_a: &[(&str, usize)],
    utts_b: &[(&str, usize)],
    target: f64,
    c: &PlanConstraints,
    seed: u64,
    attempts: usize,
) -> Outcome {
    let mut rng = seeded(seed);
    let lens_a: Vec<usize> = utts_a.iter().map(|u| u.1).collect();
    let lens_b: Vec<usize> = utts_b.iter().map(|u| u.1).collect();
    let n_all = (lens_a.len() + lens_b.len()).max(1);
    let mean_len =
        (lens_a.iter().sum::<usize>() + lens_b.iter().sum::<usize>()) as f64 / n_all as f64;
    let base = (1.0 - target).max(0.0) * mean_len;
    let mut reached = false;

    for k in 0..attempts {
        let shrink = if attempts > 1 {
            1.0 - k as f64 / (attempts - 1) as f64
        } else {
            0.0
        };
        let cap = ((base * shrink) as usize).min(c.max_gap.unwrap_or(usize::MAX));
        let hi = cap.max(c.min_gap);
        let mut draw = |n: usize| -> Vec<usize> {
            (0..n.saturating_sub(1))
                .map(|_| {
                    if hi > c.min_gap {
                        rng.random_range(c.min_gap..=hi)
                    } else {
                        c.min_gap
                    }
                })
                .collect()
        };
        let (gaps_a, gaps_b) = (draw(lens_a.len()), draw(lens_b.len()));
        let la = Layout::new(&lens_a, &gaps_a);
        let lb = Layout::new(&lens_b, &gaps_b);
        let s = Search {
            a: &la,
            b: &lb,
            target,
            c,
        };
        let (cands, hit) = s.candidates(&mut rng);
        reached |= hit;
        if cands.is_empty() {
            continue;
        }
        let d = cands[rng.random_range(0..cands.len())];
        let e = s.eval(d);
        let (_, _, timeline) = s.counts(d);
        let (start_a, start_b) = ((-d).max(0), d.max(0));
        let place = |layout: &Layout, utts: &[(&str, usize)], start: i64| TrackPlan {
            utterance_ids: utts.iter().map(|u| u.0.to_string()).collect(),
            start_offsets: layout
                .spans
                .iter()
                .map(|s| (s.0 + start) as usize)
                .collect(),
            lengths: utts.iter().map(|u| u.1).collect(),
            gap_fills: Vec::new(),
        };
        return Outcome {
            plan: Some(PlannedPair {
                a: place(&la, utts_a, start_a),
                b: place(&lb, utts_b, start_b),
                relative_shift: d,
                timeline_len: timeline as usize,
                achieved_overlap: e.ratio,
                no_speech_ratio: e.no_speech,
                attempts: k + 1,
            }),
            reached_overlap: reached,
        };
    }
    Outcome {
        plan: None,
        reached_overlap: reached,
    }
}

/// Overlap targets on a 0.05 grid found feasible with a short search.
fn probe_feasible(
    utts_a: &[(&str, usize)],
    utts_b: &[(&str, usize)],
    c: &PlanConstraints,
    seed: u64,
) -> Option<(f64, f64)> {
    let ok: Vec<f64> = (0..=20)
        .map(|i| i as f64 / 20.0)
        .filter(|&t| {
            search(utts_a, utts_b, t, c, seed, 10.min(c.max_attempts))
                .plan
                .is_some()
        })
        .collect();
    Some((*ok.first()?, *ok.last()?))
}

/// Places two tracks of utterances `(id, length)` so that their speech
/// overlap ratio is within `c.tol` of `target` and the no-speech share stays
/// at most `c.max_no_speech`.
///
/// Each attempt draws the inner gaps of both tracks, then scans the shift of
/// track B over the breakpoints of the (piecewise-linear) overlap function.
/// Gap scale shrinks with every failed attempt, ending at `min_gap`.
pub fn plan_tracks(
    utts_a: &[(&str, usize)],
    utts_b: &[(&str, usize)],
    target: f64,
    c: &PlanConstraints,
    seed: u64,
) -> Result<PlannedPair> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::InvalidParams(format!(
            "overlap target {target} outside [0, 1]"
        )));
    }
    if utts_a.is_empty() || utts_b.is_empty() || utts_a.iter().chain(utts_b).any(|u| u.1 == 0) {
        return Err(Error::InvalidParams(
            "every track needs non-empty utterances".into(),
        ));
    }
    if c.max_gap.is_some_and(|g| g < c.min_gap) {
        return Err(Error::InvalidParams(
            "max_gap is smaller than min_gap".into(),
        ));
    }
    let sa: usize = utts_a.iter().map(|u| u.1).sum();
    let sb: usize = utts_b.iter().map(|u| u.1).sum();
    let hi = max_ratio(sa, sb, c.measure);
    if target > hi + c.tol {
        let lo = probe_feasible(utts_a, utts_b, c, seed).map_or(0.0, |r| r.0);
        return Err(Error::InfeasibleOverlap {
            target,
            constraint: format!(
                "total speech durations differ ({sa} vs {sb} samples), capping the overlap ratio"
            ),
            lo,
            hi,
        });
    }
    let out = search(utts_a, utts_b, target, c, seed, c.max_attempts.max(1));
    match out.plan {
        Some(p) => Ok(p),
        None => {
            let (lo, hi) = probe_feasible(utts_a, utts_b, c, seed).unwrap_or((f64::NAN, f64::NAN));
            let constraint = if out.reached_overlap {
                format!("no-speech ratio would exceed {}", c.max_no_speech)
            } else {
                format!("no placement reaches the overlap within ±{}", c.tol)
            };
            Err(Error::InfeasibleOverlap {
                target,
                constraint,
                lo,
                hi,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::overlap::measure_overlap;

    fn check(p: &PlannedPair, target: f64, c: &PlanConstraints) {
        let a = p.a.activity(p.timeline_len).unwrap();
        let b = p.b.activity(p.timeline_len).unwrap();
        let m = measure_overlap(&a, &b, c.measure).unwrap();
        assert_eq!(m.overlap_ratio, p.achieved_overlap);
        assert!(
            (m.overlap_ratio - target).abs() <= c.tol,
            "{} vs {target}",
            m.overlap_ratio
        );
        assert!(
            m.no_speech_ratio <= c.max_no_speech,
            "no speech {}",
            m.no_speech_ratio
        );
        for plan in [&p.a, &p.b] {
            let spans = plan.spans();
            assert!(spans.windows(2).all(|w| w[0].end <= w[1].start));
            assert!(spans.last().unwrap().end <= p.timeline_len);
        }
        let earliest = p.a.start_offsets[0].min(p.b.start_offsets[0]);
        assert_eq!(earliest, 0);
    }

    #[test]
    fn full_overlap_equal_durations() {
        let a = [("a1", 16000), ("a2", 20000), ("a3", 12000)];
        let b = [("b1", 18000), ("b2", 10000), ("b3", 20000)];
        let c = PlanConstraints::default();
        let p = plan_tracks(&a, &b, 1.0, &c, 3).unwrap();
        assert_eq!(p.relative_shift, 0);
        assert_eq!(p.achieved_overlap, 1.0);
        assert_eq!(p.a.start_offsets, vec![0, 16000, 36000]);
        assert_eq!(p.b.start_offsets, vec![0, 18000, 28000]);
    }

    #[test]
    fn zero_overlap_is_disjoint() {
        let a = [("a1", 16000), ("a2", 20000), ("a3", 12000)];
        let b = [("b1", 18000), ("b2", 10000), ("b3", 20000)];
        let c = PlanConstraints::default();
        for seed in 0..20 {
            let p = plan_tracks(&a, &b, 0.0, &c, seed).unwrap();
            assert_eq!(p.achieved_overlap, 0.0);
            assert!(p.no_speech_ratio <= 0.10);
            check(&p, 0.0, &c);
        }
    }

    #[test]
    fn seeded_targets_hit_tolerance() {
        let c = PlanConstraints::default();
        let a = [("a1", 30000), ("a2", 41000), ("a3", 25000)];
        let b = [("b1", 35000), ("b2", 22000), ("b3", 40000)];
        for target in [0.2, 0.4, 0.6, 0.8] {
            for seed in 0..200 {
                let p = plan_tracks(&a, &b, target, &c, seed).unwrap();
                check(&p, target, &c);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let c = PlanConstraints::default();
        let a = [("a1", 30000), ("a2", 41000), ("a3", 25000)];
        let b = [("b1", 35000), ("b2", 22000), ("b3", 40000)];
        assert_eq!(
            plan_tracks(&a, &b, 0.4, &c, 9).unwrap(),
            plan_tracks(&a, &b, 0.4, &c, 9).unwrap()
        );
    }

    #[test]
    fn mixture_length_measure() {
        let c = PlanConstraints {
            measure: OverlapMeasure::MixtureLength,
            ..Default::default()
        };
        let a = [("a1", 30000), ("a2", 41000), ("a3", 25000)];
        let b = [("b1", 35000), ("b2", 22000), ("b3", 40000)];
        for seed in 0..20 {
            check(&plan_tracks(&a, &b, 0.3, &c, seed).unwrap(), 0.3, &c);
        }
    }

    #[test]
    fn infeasible_full_overlap_names_interval() {
        let a = [("a1", 10000), ("a2", 10000), ("a3", 10000)];
        let b = [("b1", 20000), ("b2", 20000), ("b3", 20000)];
        let err = plan_tracks(&a, &b, 1.0, &PlanConstraints::default(), 1).unwrap_err();
        match err {
            Error::InfeasibleOverlap {
                lo, hi, constraint, ..
            } => {
                assert_eq!(hi, 0.5);
                assert_eq!(lo, 0.0);
                assert!(constraint.contains("durations"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn infeasible_low_overlap_with_long_gaps() {
        // Forced one-second gaps around half-second utterances leave too much
        // silence for a disjoint placement.
        let c = PlanConstraints {
            min_gap: 16000,
            max_gap: Some(16000),
            ..Default::default()
        };
        let a = [("a1", 8000), ("a2", 8000), ("a3", 8000)];
        let b = [("b1", 8000), ("b2", 8000), ("b3", 8000)];
        let err = plan_tracks(&a, &b, 0.0, &c, 1).unwrap_err();
        assert!(
            matches!(err, Error::InfeasibleOverlap { ref constraint, .. } if constraint.contains("no-speech")),
            "{err}"
        );
    }

    #[test]
    fn rejects_bad_target() {
        let a = [("a1", 100)];
        assert!(plan_tracks(&a, &a, 1.5, &PlanConstraints::default(), 0).is_err());
    }
}
