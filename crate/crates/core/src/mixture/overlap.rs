use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::ActivityTrack;

/// Denominator of the overlap ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMeasure {
    /// `|a ∧ b| / |a ∨ b|`.
    #[default]
    Union,
    /// `|a ∧ b| / T`.
    MixtureLength,
}

impl OverlapMeasure {
    /// Ratio from the intersection, union and timeline sample counts.
    pub fn ratio(self, intersection: usize, union: usize, timeline: usize) -> f64 {
        let den = match self {
            OverlapMeasure::Union => union,
            OverlapMeasure::MixtureLength => timeline,
        };
        if den == 0 {
            0.0
        } else {
            intersection as f64 / den as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapStats {
    pub overlap_ratio: f64,
    pub no_speech_ratio: f64,
}

pub fn measure_overlap(
    a: &ActivityTrack,
    b: &ActivityTrack,
    measure: OverlapMeasure,
) -> Result<OverlapStats> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(format!(
            "activity lengths {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    let t = a.len();
    let inter = a.intersection_count(b);
    let union = a.active_count() + b.active_count() - inter;
    Ok(OverlapStats {
        overlap_ratio: measure.ratio(inter, union, t),
        no_speech_ratio: if t == 0 {
            0.0
        } else {
            1.0 - union as f64 / t as f64
        },
    })
}
