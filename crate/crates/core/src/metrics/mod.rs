//! Evaluation: signal-level scores, word error rate and report aggregation.

mod report;
mod sdr;
mod wer;

pub use report::{
    aggregate, bin_label, write_report_csv, AggregateOptions, Condition, EvalRecord, GenderPairing,
    Report, ReportRow, ReportTotals, DEFAULT_BIN_EDGES, REPORT_CSV_HEADER,
};
pub use sdr::{score_separation, sdr, si_sdr, SeparationScore, TrackScore, SDR_CAP_DB};
pub use wer::{levenshtein, parse_hypotheses, wer, WerResult};
