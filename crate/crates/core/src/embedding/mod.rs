//! Deep-clustering inference surface: per-bin embeddings are clustered with
//! soft k-means, the clusters become binary masks, and the masks split the
//! mixture spectrogram into speaker tracks.

mod io;
mod kmeans;
mod mask;
mod oracle;

pub use io::{
    embeddings_from_bytes, embeddings_to_bytes, read_embeddings, write_embeddings, EMBEDDING_MAGIC,
};
pub use kmeans::{kmeans_embed, kmeans_embed_masked, ClusterResult, KMeansOptions};
pub use mask::{apply_masks, masked_spectrograms, masks_from_labels, Mask};
pub use oracle::{ideal_binary_mask, oracle_embeddings, silence_bins};

use crate::error::{Error, Result};
use crate::signal::Spectrogram;

pub const DEFAULT_EMBEDDING_DIM: usize = 40;

/// Embedding vectors for every TF bin, laid out frame-major, then
/// frequency, then dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTensor {
    frames: usize,
    freqs: usize,
    dim: usize,
    values: Vec<f32>,
}

impl EmbeddingTensor {
    pub fn new(frames: usize, freqs: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ShapeMismatch(
                "embedding dimension must be at least 1".into(),
            ));
        }
        if values.len() != frames * freqs * dim {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {frames}x{freqs}x{dim} tensor",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite embedding value".into()));
        }
        Ok(EmbeddingTensor {
            frames,
            freqs,
            dim,
            values,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn freqs(&self) -> usize {
        self.freqs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn vector(&self, t: usize, f: usize) -> &[f32] {
        let i = (t * self.freqs + f) * self.dim;
        &self.values[i..i + self.dim]
    }

    pub fn check_matches(&self, spec: &Spectrogram) -> Result<()> {
        if self.frames != spec.frames() || self.freqs != spec.freqs() {
            return Err(Error::ShapeMismatch(format!(
                "embeddings {}x{} vs spectrogram {}x{}",
                self.frames,
                self.freqs,
                spec.frames(),
                spec.freqs()
            )));
        }
        Ok(())
    }
}
