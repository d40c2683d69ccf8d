use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the metrics layer.
#[derive(Debug, Error)]
pub enum MetricsError {
    /// Propagated from the signal-processing layer.
    #[error(transparent)]
    Dsp(#[from] cocktail_dsp::DspError),

    /// The reference signal carries no energy, so no projection exists.
    #[error("degenerate reference: target signal has zero energy")]
    DegenerateReference,

    /// Two signals that must share a length do not.
    #[error("length mismatch: {context} has {got} samples, expected {need}")]
    LengthMismatch {
        context: &'static str,
        need: usize,
        got: usize,
    },

    /// Two spectrograms that must share a shape do not.
    #[error("spectrogram shapes differ: {a:?} vs {b:?}")]
    ShapeMismatch { a: (usize, usize), b: (usize, usize) },

    /// The similarity patch does not fit inside the spectrogram grid.
    #[error("similarity patch of {patch} {axis} does not fit in a grid of {grid} {axis}")]
    PatchTooLarge {
        axis: &'static str,
        patch: usize,
        grid: usize,
    },

    /// Similarity is defined on compressed magnitudes only.
    #[error("spectrogram similarity expects power-law compressed inputs")]
    CompressionState,

    /// An enhancer implementation failed while producing its output.
    #[error("enhancer failed: {0}")]
    Enhancer(String),

    /// Filesystem failure while writing a report.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl MetricsError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MetricsError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, MetricsError>;
