//! Per-mixture evaluation records and their aggregation into report rows.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::WerResult;
use crate::error::{Error, Result};
use crate::mixture::Gender;

pub const REPORT_CSV_HEADER: &str =
    "overlap_bin,condition,gender_pairing,mean_wer,mean_si_sdr_improvement,n";

/// Bins centred on the simulated overlap targets.
pub const DEFAULT_BIN_EDGES: &[f64] = &[0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Clean,
    NoSeparationOracleSegperm,
    FullSequence,
    SegmentedOracle,
    SegmentedAffinity,
    SegmentedSpeakerId,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::Clean,
        Condition::NoSeparationOracleSegperm,
        Condition::FullSequence,
        Condition::SegmentedOracle,
        Condition::SegmentedAffinity,
        Condition::SegmentedSpeakerId,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Clean => "clean",
            Condition::NoSeparationOracleSegperm => "no_separation_oracle_segperm",
            Condition::FullSequence => "full_sequence",
            Condition::SegmentedOracle => "segmented_oracle",
            Condition::SegmentedAffinity => "segmented_affinity",
            Condition::SegmentedSpeakerId => "segmented_speaker_id",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenderPairing {
    Same,
    Different,
    /// At least one speaker has no gender metadata; only counted in `all`.
    Unknown,
    All,
}

impl GenderPairing {
    pub fn of(a: Gender, b: Gender) -> Self {
        match (a, b) {
            (Gender::Unknown, _) | (_, Gender::Unknown) => GenderPairing::Unknown,
            (x, y) if x == y => GenderPairing::Same,
            _ => GenderPairing::Different,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GenderPairing::Same => "same",
            GenderPairing::Different => "different",
            GenderPairing::Unknown => "unknown",
            GenderPairing::All => "all",
        }
    }
}

/// One mixture evaluated under one condition. WER counts are summed over
/// the mixture's tracks; the SDR figures are track means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub mixture_id: String,
    pub condition: Condition,
    pub gender_pairing: GenderPairing,
    pub achieved_overlap: f64,
    pub si_sdr_improvement_db: Option<f64>,
    pub sdr_improvement_db: Option<f64>,
    pub wer: Option<WerResult>,
    #[serde(default)]
    pub per_track: Vec<super::TrackScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggregateOptions {
    /// Emit `same`/`different` rows next to `all`.
    pub gender_split: bool,
    /// Average per-record WER instead of pooling errors over words.
    pub per_utterance_wer: bool,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        AggregateOptions {
            gender_split: true,
            per_utterance_wer: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub overlap_bin: String,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub condition: Condition,
    pub gender_pairing: GenderPairing,
    pub mean_wer: Option<f64>,
    pub mean_si_sdr_improvement: Option<f64>,
    pub mean_sdr_improvement: Option<f64>,
    pub n: usize,
    pub errors: usize,
    pub reference_words: usize,
    /// Rows whose WER is undefined because no reference words were scored.
    pub wer_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportTotals {
    pub records: usize,
    /// Records outside every bin.
    pub unbinned: usize,
    /// Pooled counts per condition over all binned records.
    pub errors: BTreeMap<Condition, usize>,
    pub reference_words: BTreeMap<Condition, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub bin_edges: Vec<f64>,
    pub rows: Vec<ReportRow>,
    pub totals: ReportTotals,
}

pub fn bin_label(lo: f64, hi: f64, last: bool) -> String {
    format!("[{lo:.2},{hi:.2}{}", if last { "]" } else { ")" })
}

fn bin_index(edges: &[f64], x: f64) -> Option<usize> {
    let nb = edges.len().checked_sub(1)?;
    (0..nb).find(|&i| x >= edges[i] && (x < edges[i + 1] || (i + 1 == nb && x <= edges[i + 1])))
}

#[derive(Default)]
struct Acc {
    n: usize,
    si_sum: f64,
    si_n: usize,
    sdr_sum: f64,
    sdr_n: usize,
    wer: WerResult,
    wer_ratio_sum: f64,
    wer_ratio_n: usize,
}

/// Bins are `[e_i, e_{i+1})` with the last one closed. Empty groups are
/// omitted.
pub fn aggregate(records: &[EvalRecord], edges: &[f64], opts: AggregateOptions) -> Result<Report> {
    if edges.len() < 2
        || edges
            .windows(2)
            .any(|w| w[0].is_nan() || w[1].is_nan() || w[0] >= w[1])
    {
        return Err(Error::InvalidParams(format!(
            "bin edges {edges:?} must be strictly increasing"
        )));
    }
    let mut groups: BTreeMap<(usize, Condition, GenderPairing), Acc> = BTreeMap::new();
    let mut totals = ReportTotals {
        records: records.len(),
        ..Default::default()
    };
    for r in records {
        let Some(b) = bin_index(edges, r.achieved_overlap) else {
            totals.unbinned += 1;
            continue;
        };
        if let Some(w) = &r.wer {
            *totals.errors.entry(r.condition).or_default() += w.errors();
            *totals.reference_words.entry(r.condition).or_default() += w.reference_words;
        }
        let mut pairings = vec![GenderPairing::All];
        if opts.gender_split
            && matches!(
                r.gender_pairing,
                GenderPairing::Same | GenderPairing::Different
            )
        {
            pairings.push(r.gender_pairing);
        }
        for g in pairings {
            let acc = groups.entry((b, r.condition, g)).or_default();
            acc.n += 1;
            if let Some(v) = r.si_sdr_improvement_db {
                acc.si_sum += v;
                acc.si_n += 1;
            }
            if let Some(v) = r.sdr_improvement_db {
                acc.sdr_sum += v;
                acc.sdr_n += 1;
            }
            if let Some(w) = &r.wer {
                acc.wer.add(w);
                if let Some(x) = w.wer() {
                    acc.wer_ratio_sum += x;
                    acc.wer_ratio_n += 1;
                }
            }
        }
    }
    let nb = edges.len() - 1;
    let rows = groups
        .into_iter()
        .map(|((b, condition, gender_pairing), a)| {
            let mean_wer = if opts.per_utterance_wer {
                (a.wer_ratio_n > 0).then(|| a.wer_ratio_sum / a.wer_ratio_n as f64)
            } else {
                a.wer.wer()
            };
            ReportRow {
                overlap_bin: bin_label(edges[b], edges[b + 1], b + 1 == nb),
                bin_lo: edges[b],
                bin_hi: edges[b + 1],
                condition,
                gender_pairing,
                mean_wer,
                mean_si_sdr_improvement: (a.si_n > 0).then(|| a.si_sum / a.si_n as f64),
                mean_sdr_improvement: (a.sdr_n > 0).then(|| a.sdr_sum / a.sdr_n as f64),
                n: a.n,
                errors: a.wer.errors(),
                reference_words: a.wer.reference_words,
                wer_undefined: a.wer.reference_words == 0,
            }
        })
        .collect();
    Ok(Report {
        bin_edges: edges.to_vec(),
        rows,
        totals,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn write_report_csv(report: &Report, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{REPORT_CSV_HEADER}")?;
    for r in &report.rows {
        writeln!(
            w,
            "\"{}\",{},{},{},{},{}",
            r.overlap_bin,
            r.condition,
            r.gender_pairing.as_str(),
            opt(r.mean_wer),
            opt(r.mean_si_sdr_improvement),
            r.n
        )?;
    }
    Ok(())
}
