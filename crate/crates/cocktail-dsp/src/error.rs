//! Error type shared by the spectral front end.

use thiserror::Error;

/// Errors produced by waveform, spectrogram, mask, and file-format routines.
#[derive(Debug, Error)]
pub enum DspError {
    /// Signal shorter than one analysis window.
    #[error("input too short: need at least {need} samples, got {got}")]
    InputTooShort { need: usize, got: usize },

    /// Inverse transform called on a compressed spectrogram.
    #[error("decompress before inversion: spectrogram is power-law compressed")]
    CompressedInput,

    /// Operation expected a compressed input but got a raw one (or vice versa).
    #[error("compression state mismatch: expected compressed={expected}")]
    CompressionState { expected: bool },

    /// Hop exceeds the window so synthesis has zero-energy gaps.
    #[error("non-invertible frame coverage: hop {hop} exceeds window {win}")]
    NonInvertibleCoverage { hop: usize, win: usize },

    /// Power-law exponent must be positive.
    #[error("invalid exponent: p = {0} must be > 0")]
    InvalidExponent(f64),

    /// Grid or length mismatch between two operands.
    #[error("shape mismatch: {context}: {a:?} vs {b:?}")]
    ShapeMismatch {
        context: &'static str,
        a: (usize, usize),
        b: (usize, usize),
    },

    /// Requested output length inconsistent with the frame count.
    #[error("output length {out_len} inconsistent with {n_frames} frames")]
    LengthMismatch { out_len: usize, n_frames: usize },

    /// Sample rate outside the supported profiles.
    #[error("unsupported sample rate {0} Hz (expected 16000 or 8000)")]
    SampleRate(u32),

    /// Non-finite sample encountered where finite data is required.
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    /// Sample amplitude outside the representable PCM range.
    #[error("sample at index {0} exceeds full scale")]
    Clipped(usize),

    /// Malformed or unsupported binary payload (WAV / AVSE).
    #[error("malformed {format} data: {detail}")]
    Malformed { format: &'static str, detail: String },

    /// Underlying I/O failure, tagged with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DspError {
    /// Convenience constructor for format errors.
    pub fn malformed(format: &'static str, detail: impl Into<String>) -> Self {
        DspError::Malformed { format, detail: detail.into() }
    }

    /// Convenience constructor wrapping an I/O error with its path.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        DspError::Io { path: path.into(), source }
    }
}
