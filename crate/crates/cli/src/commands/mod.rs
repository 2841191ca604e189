pub mod evaluate;
pub mod oracle_embed;
pub mod report;
pub mod separate;
pub mod simulate;
pub mod toy;

/// How a successful command finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Some requested items were skipped (exit code 2).
    Partial,
}
