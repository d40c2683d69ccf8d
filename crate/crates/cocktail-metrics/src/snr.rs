//! Speech-SNR estimation from a denoising enhancer.
//!
//! A model trained to pull clean speech out of noisy single-speaker mixtures
//! doubles as an SNR estimator: treat its output as the speech and whatever
//! it removed as the noise.  Datasets are filtered by keeping only segments
//! whose estimated SNR clears [`SNR_FILTER_DB`].

use cocktail_dsp::Waveform;

use crate::error::{MetricsError, Result};
use crate::sdr::SDR_CAP_DB;

/// Segments below this estimated speech SNR are discarded when filtering a
/// dataset.
pub const SNR_FILTER_DB: f64 = 17.0;

/// Anything that maps a noisy waveform to a denoised estimate of its speech
/// content.
pub trait Enhancer {
    /// Produce the denoised waveform for `mixture`, sample-aligned with the
    /// input.
    fn enhance(&self, mixture: &Waveform) -> Result<Waveform>;
}

/// Estimate the speech SNR of `mixture` in decibels by running `enhancer`
/// and comparing the retained energy to the removed energy:
/// `10·log10(‖d‖² / ‖mixture − d‖²)` with `d = enhancer(mixture)`.
///
/// A residual of exactly zero reports the `SDR_CAP_DB` ceiling; a denoised
/// output of zero reports the floor.
pub fn estimate_speech_snr(mixture: &Waveform, enhancer: &dyn Enhancer) -> Result<f64> {
    let denoised = enhancer.enhance(mixture)?;
    if denoised.len() != mixture.len() {
        return Err(MetricsError::LengthMismatch {
            context: "enhancer output",
            need: mixture.len(),
            got: denoised.len(),
        });
    }
    let speech = denoised.energy();
    let residual: f64 = mixture
        .samples()
        .iter()
        .zip(denoised.samples())
        .map(|(m, d)| (m - d) * (m - d))
        .sum();
    if speech <= 0.0 {
        return Ok(-SDR_CAP_DB);
    }
    if residual <= 0.0 {
        return Ok(SDR_CAP_DB);
    }
    Ok((10.0 * (speech / residual).log10()).clamp(-SDR_CAP_DB, SDR_CAP_DB))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cocktail_dsp::waveform::SAMPLE_RATE_DESK;

    /// Scales the input by a fixed gain; closed-form SNR follows directly.
    struct GainEnhancer(f64);

    impl Enhancer for GainEnhancer {
        fn enhance(&self, mixture: &Waveform) -> Result<Waveform> {
            Ok(mixture.scaled(self.0))
        }
    }

    struct TruncatingEnhancer;

    impl Enhancer for TruncatingEnhancer {
        fn enhance(&self, mixture: &Waveform) -> Result<Waveform> {
            let mut s = mixture.samples().to_vec();
            s.pop();
            Ok(Waveform::new(s, mixture.sample_rate())?)
        }
    }

    fn tone() -> Waveform {
        let samples: Vec<f64> = (0..4_000).map(|i| ((i as f64) * 0.21).sin()).collect();
        Waveform::new(samples, SAMPLE_RATE_DESK).unwrap()
    }

    #[test]
    fn identity_enhancer_hits_the_cap() {
        let snr = estimate_speech_snr(&tone(), &GainEnhancer(1.0)).unwrap();
        assert_eq!(snr, SDR_CAP_DB);
    }

    #[test]
    fn zero_enhancer_hits_the_floor() {
        let snr = estimate_speech_snr(&tone(), &GainEnhancer(0.0)).unwrap();
        assert_eq!(snr, -SDR_CAP_DB);
    }

    #[test]
    fn half_gain_reports_zero_db() {
        // d = m/2 keeps exactly as much energy as it removes.
        let snr = estimate_speech_snr(&tone(), &GainEnhancer(0.5)).unwrap();
        assert!(snr.abs() < 1e-12, "{snr}");
    }

    #[test]
    fn fractional_gain_matches_closed_form() {
        // d = g·m gives 10·log10(g²/(1−g)²).
        for g in [0.1, 0.25, 0.9] {
            let snr = estimate_speech_snr(&tone(), &GainEnhancer(g)).unwrap();
            let expected = 10.0 * (g * g / ((1.0 - g) * (1.0 - g))).log10();
            assert!((snr - expected).abs() < 1e-9, "gain {g}: {snr} vs {expected}");
        }
    }

    #[test]
    fn misaligned_output_is_rejected() {
        let err = estimate_speech_snr(&tone(), &TruncatingEnhancer).unwrap_err();
        assert!(err.to_string().contains("length mismatch"), "{err}");
    }
}
