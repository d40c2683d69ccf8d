use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by model construction, inference, and checkpointing.
#[derive(Debug, Error)]
pub enum NetError {
    /// Propagated from the signal-processing layer.
    #[error(transparent)]
    Dsp(#[from] cocktail_dsp::DspError),

    /// A configuration field is out of its supported range.
    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    /// Same-padding and the context convention are defined for odd kernels.
    #[error("kernel {kt}x{kf}: convention defined for odd kernels")]
    EvenKernel { kt: usize, kf: usize },

    /// Embedding streams must arrive at the pipeline's fixed frame rate.
    #[error("embedding stream at {got} fps, expected {need} fps")]
    EmbeddingFps { need: u32, got: u32 },

    /// One embedding stream per speaker stream.
    #[error("model has {need} speaker streams, got {got} embedding streams")]
    StreamCount { need: usize, got: usize },

    /// Upsampled visual frames must land within two frames of the audio grid.
    #[error("visual stream upsamples to {visual} frames vs {audio} audio frames (> 2 apart)")]
    FrameMismatch { audio: usize, visual: usize },

    /// Mask/reference count disagreement in the loss.
    #[error("{context}: expected {need} items, got {got}")]
    CountMismatch {
        context: &'static str,
        need: usize,
        got: usize,
    },

    /// Permutation search is brute-force and guarded against blow-up.
    #[error("{got} streams exceed the permutation limit of {limit}: factorial blow-up guard")]
    TooManyStreams { got: usize, limit: usize },

    /// Backward called without a recorded forward pass.
    #[error("no recorded graph: run a training forward pass first")]
    NoRecordedGraph,

    /// A tensor stopped being finite.
    #[error("non-finite values in {0}")]
    NonFinite(String),

    /// Checkpoint bytes do not start with the expected magic.
    #[error("bad checkpoint magic: expected AVSM")]
    BadMagic,

    /// Checkpoint format version is not supported.
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),

    /// Structurally invalid checkpoint contents.
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),

    /// Filesystem failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl NetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NetError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, NetError>;
