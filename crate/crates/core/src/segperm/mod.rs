//! Full-sequence and segmented separation, oracle segmentation and the
//! permutation resolvers that stitch per-segment outputs into two tracks.

mod resolve;
mod segments;
mod separate;

pub use resolve::{
    resolve_affinity, resolve_oracle, resolve_speaker_id, AffinityOptions, Assignment, GroupScore,
    ResolverKind, SegmentAssignment,
};
pub use segments::{frame_activity, frame_hop_span, oracle_segments, DEFAULT_MIN_SEGMENT_FRAMES};
pub use separate::{
    segment_outputs, separate_full_sequence, separate_no_separation, separate_segmented,
    stitch_tracks, FullSequenceResult, LocalTracks, ResolverInput, SegmentOutput, SegmentedResult,
    SeparationOptions, OUTPUT_TRACKS,
};

use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Single,
    Multi,
    None,
}

/// Half-open frame interval with its speaker count class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start_frame: usize,
    pub end_frame: usize,
    pub kind: SegmentKind,
    /// Ground-truth active speakers, when known.
    #[serde(default, rename = "speakers")]
    pub active: Vec<usize>,
}

impl Segment {
    pub fn frames(&self) -> Range<usize> {
        self.start_frame..self.end_frame
    }

    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Checks that `segments` are non-empty, sorted, disjoint and cover
/// `[0, frames)`.
pub fn validate_segments(segments: &[Segment], frames: usize) -> Result<()> {
    let mut pos = 0;
    for (i, s) in segments.iter().enumerate() {
        if s.start_frame >= s.end_frame {
            return Err(Error::InvalidSegments(format!("segment {i} is empty")));
        }
        if s.start_frame != pos {
            return Err(Error::InvalidSegments(format!(
                "segment {i} starts at frame {} but the previous one ends at {pos}",
                s.start_frame
            )));
        }
        pos = s.end_frame;
    }
    if pos != frames {
        return Err(Error::InvalidSegments(format!(
            "segments cover {pos} of {frames} frames"
        )));
    }
    Ok(())
}

pub fn read_segments(path: impl AsRef<Path>) -> Result<Vec<Segment>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn write_segments(path: impl AsRef<Path>, segments: &[Segment]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, serde_json::to_string_pretty(segments)?).map_err(|e| Error::io(path, e))
}
