//! Simulation, separation and evaluation of sparsely overlapping two-speaker
//! speech mixtures.
//!
//! The crate is organised bottom-up:
//!
//! - [`signal`]: audio buffers, STFT/ISTFT, log-Mel features, speech energy
//!   and SNR gains, WAV I/O.
//! - [`mixture`]: silence trimming, track planning at a target overlap ratio,
//!   rendering with silence-filled gaps and speech-only SNR mixing.
//! - [`embedding`]: per-bin embeddings, soft k-means, binary masks and the
//!   oracle generators that stand in for a trained embedding network.
//! - [`segperm`]: full-sequence and segmented separation, oracle
//!   segmentation and the three permutation resolvers.
//! - [`metrics`]: SI-SDR/SDR, WER and report aggregation.
//! - [`pipeline`]: one mixture through one processing condition.
//!
//! Batch-level loops (corpus simulation, per-bin clustering sweeps, frame
//! transforms) run on rayon when the `parallel` feature is enabled. Every
//! parallel path reduces in a fixed order, so [`Exec::Sequential`] and
//! [`Exec::Parallel`] produce bit-identical results.

pub mod embedding;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod mixture;
pub mod pipeline;
pub mod rng;
pub mod segperm;
pub mod signal;

pub use error::{Error, Result};
pub use exec::Exec;
pub use signal::{ActivityTrack, AudioBuffer, Span, Spectrogram, StftParams};

/// Version string written next to every artifact.
pub const VERSION: &str = concat!("sparsemix ", env!("CARGO_PKG_VERSION"));
