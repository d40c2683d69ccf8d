//! Separation-quality metrics.
//!
//! * [`sdr`] — projection-based signal-to-distortion ratio with a full
//!   four-way decomposition (target, interference, noise, artifacts).
//! * [`nsim`] — patch-based spectrogram similarity on compressed magnitudes.
//! * [`snr`] — speech-SNR estimation through a denoising [`Enhancer`], with
//!   the dataset filter threshold.
//! * [`report`] — evaluation CSV rows and the six-significant-digit number
//!   format shared by every textual report.

pub mod error;
pub mod nsim;
pub mod report;
pub mod sdr;
pub mod snr;

pub use error::{MetricsError, Result};
pub use nsim::{nsim, NsimConfig, NsimScore};
pub use report::{fmt6, mean_over, render_eval_csv, write_eval_csv, EvalRow, EVAL_CSV_HEADER};
pub use sdr::{decompose, sdr, sdr_improvement, SdrDecomposition, SDR_CAP_DB};
pub use snr::{estimate_speech_snr, Enhancer, SNR_FILTER_DB};
