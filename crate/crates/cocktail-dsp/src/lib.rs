//! Spectral front end for the cocktail separation lab.
//!
//! Everything in this crate is a pure function over owned data: short-time
//! Fourier analysis/synthesis with a least-squares inverse, power-law
//! magnitude compression, ratio and complex ratio masks, and the two binary
//! formats the pipeline reads and writes (16-bit PCM WAV, `AVSE` embedding
//! matrices).
//!
//! Sample data is `f64` end to end here; the network crate converts to `f32`
//! at its own boundary. All routines are deterministic and thread-safe.

pub mod embed;
pub mod error;
pub mod mask;
pub mod par;
pub mod spectral;
pub mod wav;
pub mod waveform;

pub use embed::EmbeddingStream;
pub use error::DspError;
pub use num_complex::Complex64;
pub use mask::{MaskKind, TFMask};
pub use spectral::{ComplexSpectrogram, StftConfig};
pub use waveform::Waveform;

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, DspError>;
