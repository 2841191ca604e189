use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open sample interval `[start, end)`. Serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn intersection_len(&self, other: &Span) -> usize {
        self.end
            .min(other.end)
            .saturating_sub(self.start.max(other.start))
    }
}

impl From<(usize, usize)> for Span {
    fn from((start, end): (usize, usize)) -> Self {
        Span { start, end }
    }
}

impl From<Span> for (usize, usize) {
    fn from(s: Span) -> Self {
        (s.start, s.end)
    }
}

/// Sample-resolution speech activity as sorted, disjoint, non-adjacent runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityTrack {
    len: usize,
    spans: Vec<Span>,
}

impl ActivityTrack {
    /// Normalizes `spans` (sort, drop empties, merge touching runs).
    pub fn new(len: usize, mut spans: Vec<Span>) -> Result<Self> {
        spans.retain(|s| !s.is_empty());
        spans.sort();
        if let Some(s) = spans.iter().find(|s| s.end > len) {
            return Err(Error::LengthMismatch(format!(
                "activity span [{}, {}) exceeds track length {len}",
                s.start, s.end
            )));
        }
        let mut merged: Vec<Span> = Vec::with_capacity(spans.len());
        for s in spans {
            match merged.last_mut() {
                Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
                _ => merged.push(s),
            }
        }
        Ok(ActivityTrack { len, spans: merged })
    }

    pub fn full(len: usize) -> Self {
        let spans = if len > 0 {
            vec![Span::new(0, len)]
        } else {
            vec![]
        };
        ActivityTrack { len, spans }
    }

    pub fn silent(len: usize) -> Self {
        ActivityTrack { len, spans: vec![] }
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        let mut spans = Vec::new();
        let mut start = None;
        for (i, &m) in mask.iter().enumerate() {
            match (m, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    spans.push(Span::new(s, i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            spans.push(Span::new(s, mask.len()));
        }
        ActivityTrack {
            len: mask.len(),
            spans,
        }
    }

    pub fn to_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.len];
        for s in &self.spans {
            m[s.start..s.end].iter_mut().for_each(|v| *v = true);
        }
        m
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    pub fn active_count(&self) -> usize {
        self.spans.iter().map(Span::len).sum()
    }

    pub fn is_active(&self, n: usize) -> bool {
        let i = self.spans.partition_point(|s| s.end <= n);
        self.spans.get(i).is_some_and(|s| s.start <= n)
    }

    /// Number of active samples inside `[start, end)`.
    pub fn active_in(&self, start: usize, end: usize) -> usize {
        let probe = Span::new(start, end);
        let first = self.spans.partition_point(|s| s.end <= start);
        self.spans[first..]
            .iter()
            .take_while(|s| s.start < end)
            .map(|s| s.intersection_len(&probe))
            .sum()
    }

    /// Samples active in both tracks. Lengths need not match.
    pub fn intersection_count(&self, other: &ActivityTrack) -> usize {
        let (mut i, mut j, mut total) = (0, 0, 0);
        while i < self.spans.len() && j < other.spans.len() {
            let (a, b) = (self.spans[i], other.spans[j]);
            total += a.intersection_len(&b);
            if a.end <= b.end {
                i += 1;
            } else {
                j += 1;
            }
        }
        total
    }

    /// Activity placed on a longer timeline starting at `offset`.
    pub fn placed(&self, offset: usize, timeline_len: usize) -> Result<ActivityTrack> {
        ActivityTrack::new(
            timeline_len,
            self.spans
                .iter()
                .map(|s| Span::new(s.start + offset, s.end + offset))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalizes_spans() {
        let a = ActivityTrack::new(
            20,
            vec![
                Span::new(5, 8),
                Span::new(0, 3),
                Span::new(3, 4),
                Span::new(9, 9),
            ],
        )
        .unwrap();
        assert_eq!(a.spans(), &[Span::new(0, 4), Span::new(5, 8)]);
        assert!(ActivityTrack::new(5, vec![Span::new(2, 6)]).is_err());
    }

    #[test]
    fn span_serializes_as_pair() {
        let json = serde_json::to_string(&vec![Span::new(0, 400), Span::new(500, 600)]).unwrap();
        assert_eq!(json, "[[0,400],[500,600]]");
    }

    proptest! {
        #[test]
        fn mask_roundtrip_and_counts(a in proptest::collection::vec(any::<bool>(), 0..200),
                                     b in proptest::collection::vec(any::<bool>(), 0..200)) {
            let ta = ActivityTrack::from_mask(&a);
            prop_assert_eq!(ta.to_mask(), a.clone());
            prop_assert_eq!(ta.active_count(), a.iter().filter(|v| **v).count());
            let tb = ActivityTrack::from_mask(&b);
            let n = a.len().min(b.len());
            let brute = (0..n).filter(|&i| a[i] && b[i]).count();
            prop_assert_eq!(ta.intersection_count(&tb), brute);
            for (i, &v) in a.iter().enumerate() {
                prop_assert_eq!(ta.is_active(i), v);
            }
            if a.len() >= 2 {
                let (s, e) = (a.len() / 3, a.len() - 1);
                prop_assert_eq!(ta.active_in(s, e), a[s..e].iter().filter(|v| **v).count());
            }
        }
    }
}
