use std::ops::Range;

use super::{Segment, SegmentKind};
use crate::signal::{ActivityTrack, StftParams};

pub const DEFAULT_MIN_SEGMENT_FRAMES: usize = 5;

/// The hop-long sample span centred in frame `t`'s window. Consecutive
/// frames tile the timeline with these spans.
pub fn frame_hop_span(t: usize, params: &StftParams, sample_rate: u32) -> Range<usize> {
    let win = params.win_len(sample_rate);
    let hop = params.hop_len(sample_rate);
    let start = t * hop + (win - hop) / 2;
    start..start + hop
}

/// A frame is active when at least half of its hop span is active.
pub fn frame_activity(
    act: &ActivityTrack,
    frames: usize,
    params: &StftParams,
    sample_rate: u32,
) -> Vec<bool> {
    (0..frames)
        .map(|t| {
            let span = frame_hop_span(t, params, sample_rate);
            let n = span.len();
            let end = span.end.min(act.len());
            let start = span.start.min(end);
            2 * act.active_in(start, end) >= n
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Run {
    start: usize,
    end: usize,
    kind: SegmentKind,
    active: Vec<usize>,
}

impl Run {
    fn len(&self) -> usize {
        self.end - self.start
    }
}

fn coalesce(runs: Vec<Run>) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::with_capacity(runs.len());
    for r in runs {
        match out.last_mut() {
            Some(last) if last.kind == r.kind && last.active == r.active => last.end = r.end,
            _ => out.push(r),
        }
    }
    out
}

/// Segments the mixture timeline by frame-level speaker count. Runs shorter
/// than `min_len` frames are absorbed, shortest first, by a neighbouring
/// multi-speaker run if there is one, else by the longer neighbour.
pub fn oracle_segments(
    activities: &[&ActivityTrack],
    params: &StftParams,
    sample_rate: u32,
    min_len: usize,
) -> Vec<Segment> {
    let len = activities.first().map(|a| a.len()).unwrap_or(0);
    let frames = params.frame_count(len, sample_rate).unwrap_or(0);
    let per: Vec<Vec<bool>> = activities
        .iter()
        .map(|a| frame_activity(a, frames, params, sample_rate))
        .collect();
    let runs: Vec<Run> = (0..frames)
        .map(|t| {
            let active: Vec<usize> = (0..per.len()).filter(|&k| per[k][t]).collect();
            let kind = match active.len() {
                0 => SegmentKind::None,
                1 => SegmentKind::Single,
                _ => SegmentKind::Multi,
            };
            Run {
                start: t,
                end: t + 1,
                kind,
                active,
            }
        })
        .collect();
    let mut runs = coalesce(runs);

    while runs.len() > 1 {
        let Some(i) = (0..runs.len())
            .filter(|&i| runs[i].len() < min_len)
            .min_by_key(|&i| (runs[i].len(), i))
        else {
            break;
        };
        let left = i.checked_sub(1);
        let right = (i + 1 < runs.len()).then_some(i + 1);
        let pick = |a: Option<usize>, b: Option<usize>| match (a, b) {
            (Some(a), Some(b)) => {
                if runs[b].len() > runs[a].len() {
                    b
                } else {
                    a
                }
            }
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => unreachable!(),
        };
        let is_multi = |j: Option<usize>| j.filter(|&j| runs[j].kind == SegmentKind::Multi);
        let target = match (is_multi(left), is_multi(right)) {
            (None, None) => pick(left, right),
            (a, b) => pick(a, b),
        };
        let absorbed = runs.remove(i);
        let target = if target > i { target - 1 } else { target };
        let t = &mut runs[target];
        t.start = t.start.min(absorbed.start);
        t.end = t.end.max(absorbed.end);
        runs = coalesce(runs);
    }

    runs.into_iter()
        .map(|r| Segment {
            start_frame: r.start,
            end_frame: r.end,
            kind: r.kind,
            active: r.active,
        })
        .collect()
}
