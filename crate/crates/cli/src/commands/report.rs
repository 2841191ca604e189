use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;
use sparsemix_core::metrics::{aggregate, write_report_csv, EvalRecord};

use super::Outcome;
use crate::config::{write_run_config, RunConfig};

/// Aggregates result files into overlap-binned CSV and JSON.
#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// `results.jsonl` files to merge.
    #[arg(long = "results", required = true, num_args = 1..)]
    pub results: Vec<PathBuf>,
    /// Comma-separated overlap bin edges.
    #[arg(long, value_delimiter = ',')]
    pub bins: Option<Vec<f64>>,
    /// Add same/different gender rows.
    #[arg(long)]
    pub gender_split: bool,
    /// Mean of per-record WERs instead of pooled errors over words.
    #[arg(long)]
    pub per_utterance_wer: bool,
    /// Directory receiving report.csv and report.json.
    #[arg(long, required_unless_present = "stdout")]
    pub out: Option<PathBuf>,
    /// Print the CSV on standard output.
    #[arg(long)]
    pub stdout: bool,
}

fn read_results(path: &PathBuf) -> Result<Vec<EvalRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l)
                .with_context(|| format!("{}:{}: bad result record", path.display(), n + 1))
        })
        .collect()
}

pub fn run(args: &ReportArgs, cfg: &mut RunConfig) -> Result<Outcome> {
    if let Some(b) = &args.bins {
        cfg.bin_edges = b.clone();
    }
    cfg.gender_split |= args.gender_split;
    cfg.per_utterance_wer |= args.per_utterance_wer;
    let mut records = Vec::new();
    for p in &args.results {
        records.extend(read_results(p)?);
    }
    if records.is_empty() {
        bail!("no results in {:?}", args.results);
    }
    let report = aggregate(&records, &cfg.bin_edges, cfg.aggregate())?;
    if report.totals.unbinned > 0 {
        log::warn!(
            "{} records fall outside the bin edges",
            report.totals.unbinned
        );
    }
    let mut csv = Vec::new();
    write_report_csv(&report, &mut csv)?;
    if let Some(out) = &args.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        fs::write(out.join("report.csv"), &csv)?;
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        fs::write(out.join("report.json"), json)?;
        write_run_config(out, "report", args, cfg)?;
    }
    if args.stdout {
        std::io::stdout().lock().write_all(&csv)?;
    }
    log::info!(
        "aggregated {} records into {} rows",
        records.len(),
        report.rows.len()
    );
    Ok(Outcome::Complete)
}
