//! Short-time Fourier analysis and least-squares synthesis.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::waveform::Waveform;
use crate::{DspError, Result};

/// Analysis parameters plus the power-law exponent used for compression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftConfig {
    /// Window length in seconds.
    pub win_s: f64,
    /// Hop length in seconds.
    pub hop_s: f64,
    /// FFT size; windows shorter than this are zero-padded on the right.
    pub fft_size: usize,
    /// Power-law compression exponent.
    pub p: f64,
}

impl StftConfig {
    /// Full-scale profile: 25 ms / 10 ms Hann at a 512-point FFT, p = 0.3.
    pub fn paper() -> Self {
        StftConfig { win_s: 0.025, hop_s: 0.010, fft_size: 512, p: 0.3 }
    }

    /// Desk profile: 12 ms / 10 ms Hann at a 96-point FFT, p = 0.3.
    ///
    /// The hop stays at 10 ms so spectrogram frames align with 25 fps
    /// embeddings upsampled by 4; the shorter window keeps the bin count
    /// (and with it every downstream convolution) small enough for
    /// single-core experiments.
    pub fn desk() -> Self {
        StftConfig { win_s: 0.012, hop_s: 0.010, fft_size: 96, p: 0.3 }
    }

    /// Profile matching a waveform's sample rate.
    pub fn for_rate(sample_rate: u32) -> Self {
        if sample_rate == crate::waveform::SAMPLE_RATE_PAPER {
            Self::paper()
        } else {
            Self::desk()
        }
    }

    pub fn win_samples(&self, sample_rate: u32) -> usize {
        (self.win_s * sample_rate as f64).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (self.hop_s * sample_rate as f64).round() as usize
    }

    /// Number of retained non-negative frequency bins.
    pub fn n_freq(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frame count for `len` samples: floor((len - win) / hop) + 1.
    /// No padding is applied at the signal end.
    pub fn frame_count(&self, len: usize, sample_rate: u32) -> Option<usize> {
        let win = self.win_samples(sample_rate);
        let hop = self.hop_samples(sample_rate);
        if len < win || hop == 0 {
            None
        } else {
            Some((len - win) / hop + 1)
        }
    }
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Complex spectrogram laid out frames x frequency bins.
#[derive(Debug, Clone)]
pub struct ComplexSpectrogram {
    /// Bin values; row t is analysis frame t.
    pub data: Array2<Complex64>,
    /// Config the grid was produced with.
    pub cfg: StftConfig,
    /// Sample rate of the source signal.
    pub sample_rate: u32,
    /// Whether magnitudes are power-law compressed.
    pub compressed: bool,
}

impl ComplexSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_freq(&self) -> usize {
        self.data.ncols()
    }

    /// Magnitude grid.
    pub fn magnitude(&self) -> Array2<f64> {
        self.data.mapv(|z| z.norm())
    }

    /// Power-law compression: magnitude^p with phase kept.
    pub fn compress(&self) -> Result<ComplexSpectrogram> {
        if self.compressed {
            return Err(DspError::CompressionState { expected: false });
        }
        Ok(ComplexSpectrogram {
            data: power_law(&self.data, self.cfg.p)?,
            cfg: self.cfg,
            sample_rate: self.sample_rate,
            compressed: true,
        })
    }

    /// Inverse of [`compress`](Self::compress): magnitude^(1/p).
    pub fn decompress(&self) -> Result<ComplexSpectrogram> {
        if !self.compressed {
            return Err(DspError::CompressionState { expected: true });
        }
        Ok(ComplexSpectrogram {
            data: power_law(&self.data, 1.0 / self.cfg.p)?,
            cfg: self.cfg,
            sample_rate: self.sample_rate,
            compressed: false,
        })
    }
}

fn power_law(grid: &Array2<Complex64>, p: f64) -> Result<Array2<Complex64>> {
    if !(p > 0.0) {
        return Err(DspError::InvalidExponent(p));
    }
    Ok(grid.mapv(|z| {
        let m = z.norm();
        if m > 0.0 {
            z * m.powf(p - 1.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// Windowed short-time transform with no end padding.
pub fn stft(w: &Waveform, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    let sr = w.sample_rate();
    let win = cfg.win_samples(sr);
    let hop = cfg.hop_samples(sr);
    let n_frames = cfg
        .frame_count(w.len(), sr)
        .ok_or(DspError::InputTooShort { need: win, got: w.len() })?;
    debug_assert!(cfg.fft_size >= win, "window must fit the FFT");

    let window = hann(win);
    let n_freq = cfg.n_freq();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);
    let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];

    let samples = w.samples();
    let mut data = Array2::from_elem((n_frames, n_freq), Complex64::new(0.0, 0.0));
    let mut buf = vec![Complex::<f64>::default(); cfg.fft_size];
    for t in 0..n_frames {
        let start = t * hop;
        for v in buf.iter_mut() {
            *v = Complex::default();
        }
        for (i, &wn) in window.iter().enumerate() {
            buf[i] = Complex::new(samples[start + i] * wn, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for k in 0..n_freq {
            data[(t, k)] = buf[k];
        }
    }
    Ok(ComplexSpectrogram { data, cfg: *cfg, sample_rate: sr, compressed: false })
}

/// Least-squares inverse: overlap-add of windowed frames divided by the
/// summed squared window. Positions with (near) zero window energy exist
/// only inside the first and last window span and are emitted as silence.
pub fn istft(s: &ComplexSpectrogram, out_len: usize) -> Result<Waveform> {
    if s.compressed {
        return Err(DspError::CompressedInput);
    }
    let sr = s.sample_rate;
    let win = s.cfg.win_samples(sr);
    let hop = s.cfg.hop_samples(sr);
    if hop > win {
        return Err(DspError::NonInvertibleCoverage { hop, win });
    }
    let n_frames = s.n_frames();
    match s.cfg.frame_count(out_len, sr) {
        Some(n) if n == n_frames => {}
        _ => return Err(DspError::LengthMismatch { out_len, n_frames }),
    }

    let window = hann(win);
    let fft_size = s.cfg.fft_size;
    let n_freq = s.n_freq();
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(fft_size);
    let mut scratch = vec![Complex::default(); ifft.get_inplace_scratch_len()];

    let mut acc = vec![0.0f64; out_len];
    let mut den = vec![0.0f64; out_len];
    let mut buf = vec![Complex::<f64>::default(); fft_size];
    for t in 0..n_frames {
        // Rebuild the Hermitian spectrum from the non-negative bins.
        buf[0] = s.data[(t, 0)];
        for k in 1..n_freq {
            buf[k] = s.data[(t, k)];
            if k < fft_size - k {
                buf[fft_size - k] = s.data[(t, k)].conj();
            }
        }
        ifft.process_with_scratch(&mut buf, &mut scratch);
        let start = t * hop;
        for i in 0..win {
            let pos = start + i;
            if pos >= out_len {
                break;
            }
            let y = buf[i].re / fft_size as f64;
            acc[pos] += window[i] * y;
            den[pos] += window[i] * window[i];
        }
    }
    let mut out = vec![0.0f64; out_len];
    for i in 0..out_len {
        if den[i] > 1e-12 {
            out[i] = acc[i] / den[i];
        }
    }
    Waveform::new(out, sr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct O(N^2) discrete Fourier transform of one windowed, zero-padded
    /// frame. Independent reference for the FFT path.
    fn dft_oracle(frame: &[f64], fft_size: usize, bin: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (n, &x) in frame.iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * bin as f64 * n as f64 / fft_size as f64;
            acc += Complex64::new(x * ang.cos(), x * ang.sin());
        }
        acc
    }

    fn noise(n: usize, sr: u32, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::new((0..n).map(|_| rng.gen_range(-0.4..0.4)).collect(), sr).unwrap()
    }

    #[test]
    fn paper_profile_shape_is_298_by_257() {
        let w = noise(48_000, 16_000, 1);
        let s = stft(&w, &StftConfig::paper()).unwrap();
        assert_eq!((s.n_frames(), s.n_freq()), (298, 257));
    }

    #[test]
    fn desk_profile_shape_for_3s() {
        let w = noise(24_000, 8_000, 2);
        let s = stft(&w, &StftConfig::desk()).unwrap();
        assert_eq!((s.n_frames(), s.n_freq()), (299, 49));
    }

    #[test]
    fn zero_input_gives_zero_bins() {
        let w = Waveform::zeros(48_000, 16_000).unwrap();
        let s = stft(&w, &StftConfig::paper()).unwrap();
        assert!(s.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn too_short_input_errors() {
        let w = Waveform::zeros(399, 16_000).unwrap();
        assert!(matches!(
            stft(&w, &StftConfig::paper()),
            Err(DspError::InputTooShort { need: 400, got: 399 })
        ));
    }

    #[test]
    fn pure_cosine_matches_direct_dft_at_every_frame() {
        // Cosine exactly on bin 40 of the 512-point grid.
        let cfg = StftConfig::paper();
        let sr = 16_000u32;
        let k = 40usize;
        let f = k as f64 * sr as f64 / cfg.fft_size as f64;
        let n = 8_000;
        let w = Waveform::new(
            (0..n)
                .map(|i| 0.3 * (2.0 * std::f64::consts::PI * f * i as f64 / sr as f64).cos())
                .collect(),
            sr,
        )
        .unwrap();
        let s = stft(&w, &cfg).unwrap();

        let win = cfg.win_samples(sr);
        let hop = cfg.hop_samples(sr);
        let window = hann(win);
        for t in 0..s.n_frames() {
            let frame: Vec<f64> = (0..win)
                .map(|i| w.samples()[t * hop + i] * window[i])
                .collect();
            let want = dft_oracle(&frame, cfg.fft_size, k);
            let got = s.data[(t, k)];
            let rel = (got - want).norm() / want.norm();
            assert!(rel <= 1e-6, "frame {t}: rel error {rel}");
            // The peak really is at bin k.
            let peak = (0..s.n_freq()).max_by(|a, b| {
                s.data[(t, *a)].norm().partial_cmp(&s.data[(t, *b)].norm()).unwrap()
            });
            assert_eq!(peak, Some(k));
        }
    }

    #[test]
    fn random_frames_match_direct_dft_on_all_bins() {
        let cfg = StftConfig::desk();
        let w = noise(2_000, 8_000, 3);
        let s = stft(&w, &cfg).unwrap();
        let win = cfg.win_samples(8_000);
        let hop = cfg.hop_samples(8_000);
        let window = hann(win);
        for &t in &[0usize, 7, s.n_frames() - 1] {
            let frame: Vec<f64> =
                (0..win).map(|i| w.samples()[t * hop + i] * window[i]).collect();
            for k in 0..s.n_freq() {
                let want = dft_oracle(&frame, cfg.fft_size, k);
                let got = s.data[(t, k)];
                assert!(
                    (got - want).norm() <= 1e-9 * (1.0 + want.norm()),
                    "bin {k} frame {t}"
                );
            }
        }
    }

    #[test]
    fn stft_is_linear() {
        let cfg = StftConfig::desk();
        let a = noise(4_000, 8_000, 4);
        let b = noise(4_000, 8_000, 5);
        let mixed = Waveform::new(
            a.samples().iter().zip(b.samples()).map(|(x, y)| 2.0 * x - 0.5 * y).collect(),
            8_000,
        )
        .unwrap();
        let sa = stft(&a, &cfg).unwrap();
        let sb = stft(&b, &cfg).unwrap();
        let sm = stft(&mixed, &cfg).unwrap();
        let mut worst = 0.0f64;
        for ((za, zb), zm) in sa.data.iter().zip(sb.data.iter()).zip(sm.data.iter()) {
            let want = 2.0 * za - 0.5 * zb;
            worst = worst.max((want - zm).norm() / (1.0 + want.norm()));
        }
        assert!(worst <= 1e-9, "linearity violated: {worst}");
    }

    /// Round trip over both profiles: everything outside the first/last
    /// window span must come back within 1e-4 relative RMS.
    #[test]
    fn istft_round_trips() {
        for (sr, n) in [(16_000u32, 48_000usize), (8_000, 24_000)] {
            let cfg = StftConfig::for_rate(sr);
            let w = noise(n, sr, 100 + sr as u64);
            let s = stft(&w, &cfg).unwrap();
            let r = istft(&s, n).unwrap();
            let win = cfg.win_samples(sr);
            let body = win..(n - win);
            let mut err = 0.0;
            let mut ref_e = 0.0;
            for i in body {
                let d = w.samples()[i] - r.samples()[i];
                err += d * d;
                ref_e += w.samples()[i] * w.samples()[i];
            }
            let rel = (err / ref_e).sqrt();
            assert!(rel <= 1e-4, "rate {sr}: rel RMS {rel}");
        }
    }

    #[test]
    fn istft_rejects_compressed_input() {
        let w = noise(24_000, 8_000, 7);
        let s = stft(&w, &StftConfig::desk()).unwrap().compress().unwrap();
        assert!(matches!(istft(&s, 24_000), Err(DspError::CompressedInput)));
    }

    #[test]
    fn istft_rejects_gapped_coverage() {
        let w = noise(24_000, 8_000, 8);
        let mut cfg = StftConfig::desk();
        let s = stft(&w, &cfg).unwrap();
        // Same grid, but claim a hop beyond the window.
        cfg.hop_s = 0.020;
        let bad = ComplexSpectrogram { data: s.data.clone(), cfg, sample_rate: 8_000, compressed: false };
        assert!(matches!(istft(&bad, 24_000), Err(DspError::NonInvertibleCoverage { .. })));
    }

    #[test]
    fn istft_rejects_inconsistent_length() {
        let w = noise(24_000, 8_000, 9);
        let s = stft(&w, &StftConfig::desk()).unwrap();
        assert!(matches!(istft(&s, 10_000), Err(DspError::LengthMismatch { .. })));
    }

    #[test]
    fn compress_hand_values() {
        // (4, 0) at p = 0.5 -> (2, 0); (3, 4) at p = 0.3 keeps its phase.
        let w = noise(24_000, 8_000, 10);
        let mut s = stft(&w, &StftConfig::desk()).unwrap();
        s.data[(0, 0)] = Complex64::new(4.0, 0.0);
        s.data[(0, 1)] = Complex64::new(3.0, 4.0);
        let mut cfg_half = s.clone();
        cfg_half.cfg.p = 0.5;
        let c = cfg_half.compress().unwrap();
        assert!((c.data[(0, 0)] - Complex64::new(2.0, 0.0)).norm() < 1e-12);

        let c3 = s.compress().unwrap();
        let z = c3.data[(0, 1)];
        assert!((z.norm() - 5f64.powf(0.3)).abs() < 1e-12);
        assert!((z.arg() - 4f64.atan2(3.0)).abs() < 1e-12);
    }

    #[test]
    fn compress_then_decompress_is_identity() {
        let w = noise(24_000, 8_000, 11);
        let s = stft(&w, &StftConfig::desk()).unwrap();
        let back = s.compress().unwrap().decompress().unwrap();
        let mut worst = 0.0f64;
        for (a, b) in s.data.iter().zip(back.data.iter()) {
            worst = worst.max((a - b).norm() / (1.0 + a.norm()));
        }
        assert!(worst <= 1e-9, "round trip error {worst}");
        assert!(!back.compressed);
    }

    #[test]
    fn invalid_exponent_errors() {
        let w = noise(24_000, 8_000, 12);
        let mut s = stft(&w, &StftConfig::desk()).unwrap();
        s.cfg.p = 0.0;
        assert!(matches!(s.compress(), Err(DspError::InvalidExponent(_))));
    }

    /// Parseval per frame: the full-circle spectral energy equals fft_size
    /// times the windowed frame energy, for every input. The ratio to the
    /// window-weighted signal energy is the constant fft_size.
    #[test]
    fn energy_ratio_is_window_constant() {
        let cfg = StftConfig::desk();
        let sr = 8_000;
        let win = cfg.win_samples(sr);
        let hop = cfg.hop_samples(sr);
        let window = hann(win);
        let mut ratios = Vec::new();
        for seed in 0..20u64 {
            let w = noise(8_000, sr, 200 + seed);
            let s = stft(&w, &cfg).unwrap();
            // Full-circle energy from the half spectrum.
            let mut spec_e = 0.0;
            for t in 0..s.n_frames() {
                for k in 0..s.n_freq() {
                    let e = s.data[(t, k)].norm_sqr();
                    let double = k != 0 && k != cfg.fft_size - k;
                    spec_e += if double { 2.0 * e } else { e };
                }
            }
            let mut weighted = 0.0;
            for t in 0..s.n_frames() {
                for i in 0..win {
                    let x = w.samples()[t * hop + i] * window[i];
                    weighted += x * x;
                }
            }
            ratios.push(spec_e / weighted);
        }
        let mean: f64 = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let var: f64 =
            ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / ratios.len() as f64;
        assert!((mean - cfg.fft_size as f64).abs() / (cfg.fft_size as f64) < 1e-12);
        assert!(var < 1e-8, "ratio variance {var}");
    }
}
