//! Time-domain signal container.

use crate::{DspError, Result};

/// Sample rate of the full-scale profile.
pub const SAMPLE_RATE_PAPER: u32 = 16_000;
/// Sample rate of the desk profile.
pub const SAMPLE_RATE_DESK: u32 = 8_000;

/// Mono waveform with a fixed sample rate.
///
/// Samples are finite `f64` in nominal full scale [-1, 1]; PCM conversion
/// clamps on export. Only the two supported rates are accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    /// Builds a waveform, validating rate and finiteness.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        check_rate(sample_rate)?;
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::NonFinite(i));
        }
        Ok(Waveform { samples, sample_rate })
    }

    /// All-zero waveform of `n` samples.
    pub fn zeros(n: usize, sample_rate: u32) -> Result<Self> {
        check_rate(sample_rate)?;
        Ok(Waveform { samples: vec![0.0; n], sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Root-mean-square amplitude; 0 for an empty signal.
    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.energy() / self.samples.len() as f64).sqrt()
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    /// Returns a gain-scaled copy.
    pub fn scaled(&self, gain: f64) -> Self {
        Waveform {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Exact sample-wise sum of equally long, equal-rate parts.
    pub fn sum(parts: &[&Waveform]) -> Result<Self> {
        let first = parts.first().expect("sum of zero waveforms");
        let mut out = vec![0.0f64; first.len()];
        for p in parts {
            if p.len() != first.len() || p.sample_rate != first.sample_rate {
                return Err(DspError::ShapeMismatch {
                    context: "waveform sum",
                    a: (first.len(), first.sample_rate as usize),
                    b: (p.len(), p.sample_rate as usize),
                });
            }
            for (o, s) in out.iter_mut().zip(&p.samples) {
                *o += s;
            }
        }
        Ok(Waveform { samples: out, sample_rate: first.sample_rate })
    }

    /// Snaps every sample to the nearest 16-bit PCM level (k / 32768).
    ///
    /// Errors if a sample falls outside the representable range instead of
    /// clipping, so corpora stay exactly summable after a disk round trip.
    pub fn quantized_i16(&self) -> Result<Self> {
        let mut out = Vec::with_capacity(self.samples.len());
        for (i, s) in self.samples.iter().enumerate() {
            let q = (s * 32768.0).round();
            if !(-32768.0..=32767.0).contains(&q) {
                return Err(DspError::Clipped(i));
            }
            out.push(q / 32768.0);
        }
        Ok(Waveform { samples: out, sample_rate: self.sample_rate })
    }
}

fn check_rate(rate: u32) -> Result<()> {
    if rate == SAMPLE_RATE_PAPER || rate == SAMPLE_RATE_DESK {
        Ok(())
    } else {
        Err(DspError::SampleRate(rate))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsupported_rate() {
        assert!(matches!(Waveform::new(vec![0.0], 44_100), Err(DspError::SampleRate(44_100))));
    }

    #[test]
    fn rejects_non_finite() {
        let err = Waveform::new(vec![0.0, f64::NAN], 16_000).unwrap_err();
        assert!(matches!(err, DspError::NonFinite(1)));
    }

    #[test]
    fn rms_and_energy() {
        let w = Waveform::new(vec![0.5, -0.5, 0.5, -0.5], 8_000).unwrap();
        assert!((w.energy() - 1.0).abs() < 1e-15);
        assert!((w.rms() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sum_is_exact_on_pcm_grid() {
        let a = Waveform::new(vec![100.0 / 32768.0; 8], 8_000).unwrap();
        let b = Waveform::new(vec![-37.0 / 32768.0; 8], 8_000).unwrap();
        let s = Waveform::sum(&[&a, &b]).unwrap();
        for v in s.samples() {
            assert_eq!(*v, 63.0 / 32768.0);
        }
    }

    #[test]
    fn quantize_errors_on_overflow() {
        let w = Waveform::new(vec![1.5], 8_000).unwrap();
        assert!(matches!(w.quantized_i16(), Err(DspError::Clipped(0))));
    }

    #[test]
    fn sum_length_mismatch_errors() {
        let a = Waveform::zeros(8, 8_000).unwrap();
        let b = Waveform::zeros(9, 8_000).unwrap();
        assert!(Waveform::sum(&[&a, &b]).is_err());
    }
}
