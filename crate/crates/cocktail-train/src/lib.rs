//! Optimization and evaluation for the cocktail separation lab.
//!
//! The loop is deliberately small: Adam on a halving learning-rate schedule,
//! fixed-size aligned crops drawn from a seeded stream, parallel per-sample
//! passes reduced in batch order.  Everything downstream of a seed is
//! bit-reproducible — loss curves, checkpoints, and evaluation reports.
//!
//! Audio-visual models train and score with a fixed stream-to-source
//! pairing; the audio-only baseline uses permutation-invariant training and
//! is granted the best assignment at evaluation time.

pub mod adam;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod separate;
pub mod trainer;

pub use adam::Adam;
pub use config::{TrainConfig, DESK_LR0, PAPER_LR0};
pub use data::{protocol_for, Dataset, Protocol, TrainItem};
pub use error::{Result, TrainError};
pub use eval::{
    estimate_f0, evaluate, evaluate_oracle, remix_at_snr, EvalReport, OracleSeparator,
    SpeechEnhancer, LOW_F0_SPLIT_HZ,
};
pub use separate::{resynthesize, separate, separate_streams};
pub use trainer::{train, CurvePoint, TrainRun, CROP_FRAMES};
