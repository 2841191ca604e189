use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WerResult {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_words: usize,
}

impl WerResult {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `None` for an empty reference.
    pub fn wer(&self) -> Option<f64> {
        (self.reference_words > 0).then(|| self.errors() as f64 / self.reference_words as f64)
    }

    pub fn add(&mut self, other: &WerResult) {
        self.substitutions += other.substitutions;
        self.deletions += other.deletions;
        self.insertions += other.insertions;
        self.reference_words += other.reference_words;
    }
}

/// Unit-cost Levenshtein alignment. On equal-cost paths the backtrace
/// prefers substitution (or match), then deletion, then insertion.
pub fn wer<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> WerResult {
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for (j, v) in d.iter_mut().enumerate().take(m + 1) {
        *v = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1]
                + usize::from(reference[i - 1].as_ref() != hypothesis[j - 1].as_ref());
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = sub.min(del).min(ins);
        }
    }
    let mut r = WerResult {
        reference_words: n,
        ..Default::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1].as_ref() == hypothesis[j - 1].as_ref();
            if d[(i - 1) * w + j - 1] + usize::from(!same) == here {
                r.substitutions += usize::from(!same);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            r.deletions += 1;
            i -= 1;
        } else {
            r.insertions += 1;
            j -= 1;
        }
    }
    r
}

/// Plain edit distance, kept separate from the aligning implementation.
pub fn levenshtein<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            let c = usize::from(x.as_ref() != y.as_ref());
            cur[j + 1] = (prev[j] + c).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Parses `id<TAB>words` lines. Blank lines are skipped; a line without a
/// tab is an id with an empty hypothesis.
pub fn parse_hypotheses(text: &str) -> Result<BTreeMap<String, Vec<String>>, String> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, words) = line.split_once('\t').unwrap_or((line, ""));
        let id = id.trim();
        if id.is_empty() {
            return Err(format!("line {}: empty id", n + 1));
        }
        let words = words.split_whitespace().map(str::to_string).collect();
        if out.insert(id.to_string(), words).is_some() {
            return Err(format!("line {}: duplicate id {id}", n + 1));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn worked_examples() {
        let r = wer(&words("a b c d e"), &words("a b c d e"));
        assert_eq!((r.substitutions, r.deletions, r.insertions), (0, 0, 0));
        assert_eq!(r.wer(), Some(0.0));
        let r = wer(&words("a b c"), &words(""));
        assert_eq!((r.deletions, r.wer()), (3, Some(1.0)));
        let r = wer(&words("the cat sat"), &words("the cat on sat"));
        assert_eq!((r.substitutions, r.deletions, r.insertions), (0, 0, 1));
        assert!((r.wer().unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(wer(&words(""), &words("x y")).wer(), None);
    }

    #[test]
    fn tie_prefers_substitution() {
        // "a b" -> "b c": two substitutions or one deletion plus one insertion
        // both cost 2.
        let r = wer(&words("a b"), &words("b c"));
        assert_eq!(r.errors(), 2);
        assert_eq!(r.substitutions, 2);
    }

    #[test]
    fn hypotheses_file() {
        let h = parse_hypotheses("mix00000_track0\tthe cat\nmix00000_track1\n\n").unwrap();
        assert_eq!(h["mix00000_track0"], vec!["the", "cat"]);
        assert!(h["mix00000_track1"].is_empty());
        assert!(parse_hypotheses("a\tx\na\ty").is_err());
    }

    proptest! {
        #[test]
        fn counts_match_edit_distance(
            a in proptest::collection::vec(0u8..4, 0..12),
            b in proptest::collection::vec(0u8..4, 0..12),
        ) {
            let a: Vec<String> = a.iter().map(|x| x.to_string()).collect();
            let b: Vec<String> = b.iter().map(|x| x.to_string()).collect();
            let r = wer(&a, &b);
            prop_assert_eq!(r.errors(), levenshtein(&a, &b));
            prop_assert_eq!(r.reference_words, a.len());
            // Alignment bookkeeping: matched+substituted+deleted = |ref|.
            prop_assert!(r.deletions + r.substitutions <= a.len());
            prop_assert_eq!(a.len() - r.deletions + r.insertions, b.len());
        }
    }
}
