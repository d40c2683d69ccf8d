//! Face-embedding streams and the `AVSE` binary matrix format.
//!
//! Layout: magic `AVSE`, u32 version (= 1), u32 n_frames, u32 dim, then
//! n_frames * dim f32 values, row-major, all little-endian.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::{DspError, Result};

/// Embedding frame rate every stream must carry.
pub const EMBEDDING_FPS: u32 = 25;

const MAGIC: &[u8; 4] = b"AVSE";
const VERSION: u32 = 1;

/// Fixed-rate sequence of per-frame embedding vectors.
///
/// An all-zero row denotes a missing frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStream {
    /// Rows are frames, columns are embedding dimensions.
    pub data: Array2<f32>,
    /// Frames per second; [`EMBEDDING_FPS`] everywhere in this pipeline.
    pub fps: u32,
}

impl EmbeddingStream {
    pub fn new(data: Array2<f32>) -> Self {
        EmbeddingStream { data, fps: EMBEDDING_FPS }
    }

    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    /// Zeroes the frame range [start, end), the missing-frame convention.
    pub fn zero_frames(&mut self, start: usize, end: usize) {
        let end = end.min(self.n_frames());
        for t in start.min(end)..end {
            self.data.row_mut(t).fill(0.0);
        }
    }
}

/// Serializes a raw matrix in the AVSE layout.
pub fn encode_matrix(m: &Array2<f32>) -> Vec<u8> {
    let (n, d) = m.dim();
    let mut out = Vec::with_capacity(16 + n * d * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses AVSE bytes back into a matrix.
pub fn decode_matrix(bytes: &[u8]) -> Result<Array2<f32>> {
    let bad = |detail: &str| DspError::malformed("AVSE", detail.to_string());
    if bytes.len() < 16 {
        return Err(bad("header truncated"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let ver = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if ver != VERSION {
        return Err(bad(&format!("unsupported version {ver}")));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let need = 16 + n * d * 4;
    if bytes.len() != need {
        return Err(bad(&format!("expected {need} bytes, got {}", bytes.len())));
    }
    let mut values = Vec::with_capacity(n * d);
    for c in bytes[16..].chunks_exact(4) {
        values.push(f32::from_le_bytes(c.try_into().unwrap()));
    }
    Array2::from_shape_vec((n, d), values).map_err(|_| bad("shape error"))
}

/// Writes an embedding stream to disk.
pub fn write_avse(path: impl AsRef<Path>, e: &EmbeddingStream) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_matrix(&e.data))
        .map_err(|err| DspError::io(path.display().to_string(), err))
}

/// Reads an embedding stream from disk (fps is fixed by the format).
pub fn read_avse(path: impl AsRef<Path>) -> Result<EmbeddingStream> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|err| DspError::io(path.display().to_string(), err))?;
    Ok(EmbeddingStream::new(decode_matrix(&bytes)?))
}
