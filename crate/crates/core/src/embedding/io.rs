//! `EMB1` files: 4-byte magic, little-endian u32 frames, freqs, dim and a
//! zero reserved word, then `frames·freqs·dim` little-endian f32 values.

use std::fs;
use std::path::Path;

use super::EmbeddingTensor;
use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: u64 = 20;

pub fn embeddings_to_bytes(emb: &EmbeddingTensor) -> Result<Vec<u8>> {
    let dims = [emb.frames(), emb.freqs(), emb.dim()];
    let mut out = Vec::with_capacity(HEADER_LEN as usize + emb.values().len() * 4);
    out.extend_from_slice(EMBEDDING_MAGIC);
    for d in dims {
        let d =
            u32::try_from(d).map_err(|_| Error::BadHeader(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in emb.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn embeddings_from_bytes(bytes: &[u8]) -> Result<EmbeddingTensor> {
    let len = bytes.len() as u64;
    if bytes.len() >= 4 && &bytes[..4] != EMBEDDING_MAGIC {
        return Err(Error::BadMagic);
    }
    if len < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            actual: len,
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let (frames, freqs, dim, reserved) = (word(0), word(1), word(2), word(3));
    if reserved != 0 {
        return Err(Error::BadHeader(format!(
            "reserved word is {reserved}, expected 0"
        )));
    }
    if dim == 0 {
        return Err(Error::BadHeader("embedding dimension is 0".into()));
    }
    let overflow = Error::DimensionOverflow { frames, freqs, dim };
    let payload = (frames as u64)
        .checked_mul(freqs as u64)
        .and_then(|v| v.checked_mul(dim as u64))
        .and_then(|v| v.checked_mul(4))
        .filter(|v| usize::try_from(*v).is_ok())
        .ok_or(overflow)?;
    let actual = len - HEADER_LEN;
    if actual < payload {
        return Err(Error::Truncated {
            expected: payload,
            actual,
        });
    }
    if actual > payload {
        return Err(Error::BadHeader(format!(
            "{} trailing bytes after payload",
            actual - payload
        )));
    }
    let values = bytes[HEADER_LEN as usize..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingTensor::new(frames as usize, freqs as usize, dim as usize, values)
}

pub fn write_embeddings(emb: &EmbeddingTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, embeddings_to_bytes(emb)?).map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    embeddings_from_bytes(&bytes)
}
