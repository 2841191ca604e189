//! Simulation of sparsely overlapping two-speaker mixtures.
//!
//! Utterances are trimmed to their speech region, three per speaker are laid
//! out on two tracks separated by silence gaps, the relative placement is
//! searched so that the speech overlap hits a target ratio without the
//! no-speech share exceeding a cap, gaps are filled from a bank of excised
//! silences and the tracks are mixed at a speech-only SNR.

mod corpus;
mod overlap;
mod plan;
mod render;
pub mod synthetic;
mod trim;

pub use corpus::{
    load_corpus, simulate_corpus, simulate_one, synthesize, ActivityFile, Corpus, ManifestEntry,
    MixtureFiles, MixtureRecord, SimulatedMixture, SimulationConfig, SimulationSummary,
    SkippedMixture, SpeakerMeta,
};
pub use overlap::{measure_overlap, OverlapMeasure, OverlapStats};
pub use plan::{plan_tracks, PlanConstraints, PlannedPair, TrackPlan};
pub use render::{
    choose_gap_fills, mix, render_track, synthesize_track, GapFill, GapPiece, Mixed, SilenceBank,
    SilenceClip,
};
pub use trim::{
    parse_ctm, trim_silence, AlignedWord, EnergyVad, RawUtterance, TrimAuthority, Utterance,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    #[serde(alias = "m")]
    Male,
    #[serde(alias = "f")]
    Female,
    #[default]
    #[serde(other)]
    Unknown,
}
