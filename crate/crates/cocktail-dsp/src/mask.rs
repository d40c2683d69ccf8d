//! Time-frequency masks: ratio and complex ratio variants.

use ndarray::Array3;
use num_complex::Complex64;

use crate::spectral::ComplexSpectrogram;
use crate::{DspError, Result};

/// Denominator floor guarding quotients against empty bins.
pub const MASK_EPS: f64 = 1e-8;
/// Mask values recovered from sigmoid space are clipped to this magnitude.
pub const LOGIT_CLIP: f64 = 10.0;

/// Mask family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    /// Non-negative magnitude ratio, one plane, clipped to [0, 1].
    Ratio,
    /// Complex ratio, two planes (real, imaginary), unbounded.
    ComplexRatio,
}

impl MaskKind {
    pub fn planes(self) -> usize {
        match self {
            MaskKind::Ratio => 1,
            MaskKind::ComplexRatio => 2,
        }
    }
}

/// Per-bin mask grid laid out frames x frequency x planes.
#[derive(Debug, Clone)]
pub struct TFMask {
    pub kind: MaskKind,
    pub planes: Array3<f64>,
    /// True when values live in sigmoid space (0, 1).
    pub compressed: bool,
}

impl TFMask {
    pub fn n_frames(&self) -> usize {
        self.planes.shape()[0]
    }

    pub fn n_freq(&self) -> usize {
        self.planes.shape()[1]
    }

    /// Sigmoid compression of every plane value.
    pub fn sigmoid_compress(&self) -> Result<TFMask> {
        if self.compressed {
            return Err(DspError::CompressionState { expected: false });
        }
        Ok(TFMask {
            kind: self.kind,
            planes: self.planes.mapv(|x| 1.0 / (1.0 + (-x).exp())),
            compressed: true,
        })
    }

    /// Logit inverse of [`sigmoid_compress`](Self::sigmoid_compress).
    ///
    /// Inputs are clamped to [1e-7, 1 - 1e-7] and outputs clipped to
    /// +/- [`LOGIT_CLIP`] so saturated bins stay finite.
    pub fn sigmoid_decompress(&self) -> Result<TFMask> {
        if !self.compressed {
            return Err(DspError::CompressionState { expected: true });
        }
        Ok(TFMask {
            kind: self.kind,
            planes: self.planes.mapv(|y| {
                let y = y.clamp(1e-7, 1.0 - 1e-7);
                (y / (1.0 - y)).ln().clamp(-LOGIT_CLIP, LOGIT_CLIP)
            }),
            compressed: false,
        })
    }

    /// Flattens to a frames x (freq * planes) matrix for debug serialization
    /// in the embedding-matrix format. Column f * planes + p holds plane p
    /// of bin f.
    pub fn to_matrix(&self) -> ndarray::Array2<f32> {
        let (t, f, p) = self.planes.dim();
        let mut out = ndarray::Array2::zeros((t, f * p));
        for ti in 0..t {
            for fi in 0..f {
                for pi in 0..p {
                    out[(ti, fi * p + pi)] = self.planes[(ti, fi, pi)] as f32;
                }
            }
        }
        out
    }
}

fn check_pair(clean: &ComplexSpectrogram, noisy: &ComplexSpectrogram) -> Result<()> {
    if clean.compressed || noisy.compressed {
        return Err(DspError::CompressionState { expected: false });
    }
    if clean.data.dim() != noisy.data.dim() {
        return Err(DspError::ShapeMismatch {
            context: "mask oracle",
            a: clean.data.dim(),
            b: noisy.data.dim(),
        });
    }
    Ok(())
}

/// Ideal ratio mask |clean| / |noisy|, floored at [`MASK_EPS`] and clipped
/// to [0, 1].
pub fn oracle_rm(clean: &ComplexSpectrogram, noisy: &ComplexSpectrogram) -> Result<TFMask> {
    check_pair(clean, noisy)?;
    let (t, f) = clean.data.dim();
    let mut planes = Array3::zeros((t, f, 1));
    for ti in 0..t {
        for fi in 0..f {
            let m = clean.data[(ti, fi)].norm() / noisy.data[(ti, fi)].norm().max(MASK_EPS);
            planes[(ti, fi, 0)] = m.clamp(0.0, 1.0);
        }
    }
    Ok(TFMask { kind: MaskKind::Ratio, planes, compressed: false })
}

/// Ideal complex ratio mask clean / noisy (unbounded; the floor only guards
/// the denominator magnitude).
pub fn oracle_crm(clean: &ComplexSpectrogram, noisy: &ComplexSpectrogram) -> Result<TFMask> {
    check_pair(clean, noisy)?;
    let (t, f) = clean.data.dim();
    let mut planes = Array3::zeros((t, f, 2));
    for ti in 0..t {
        for fi in 0..f {
            let n = noisy.data[(ti, fi)];
            let m = n.norm();
            let q = if m == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                clean.data[(ti, fi)] * n.conj() / (m * m.max(MASK_EPS))
            };
            planes[(ti, fi, 0)] = q.re;
            planes[(ti, fi, 1)] = q.im;
        }
    }
    Ok(TFMask { kind: MaskKind::ComplexRatio, planes, compressed: false })
}

fn check_apply(mask: &TFMask, spec: &ComplexSpectrogram, kind: MaskKind) -> Result<()> {
    if mask.compressed {
        return Err(DspError::CompressionState { expected: false });
    }
    if spec.compressed {
        return Err(DspError::CompressionState { expected: false });
    }
    if mask.kind != kind {
        return Err(DspError::ShapeMismatch {
            context: "mask kind",
            a: (mask.kind.planes(), 0),
            b: (kind.planes(), 0),
        });
    }
    if (mask.n_frames(), mask.n_freq()) != spec.data.dim() {
        return Err(DspError::ShapeMismatch {
            context: "mask apply",
            a: (mask.n_frames(), mask.n_freq()),
            b: spec.data.dim(),
        });
    }
    Ok(())
}

/// Scales each bin magnitude by the ratio mask; the noisy phase is untouched.
pub fn apply_rm(mask: &TFMask, spec: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
    check_apply(mask, spec, MaskKind::Ratio)?;
    let mut data = spec.data.clone();
    for ((t, f), z) in data.indexed_iter_mut() {
        *z *= mask.planes[(t, f, 0)];
    }
    Ok(ComplexSpectrogram { data, cfg: spec.cfg, sample_rate: spec.sample_rate, compressed: false })
}

/// Complex per-bin multiplication by the mask.
pub fn apply_crm(mask: &TFMask, spec: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
    check_apply(mask, spec, MaskKind::ComplexRatio)?;
    let mut data = spec.data.clone();
    for ((t, f), z) in data.indexed_iter_mut() {
        *z *= Complex64::new(mask.planes[(t, f, 0)], mask.planes[(t, f, 1)]);
    }
    Ok(ComplexSpectrogram { data, cfg: spec.cfg, sample_rate: spec.sample_rate, compressed: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{stft, StftConfig};
    use crate::waveform::Waveform;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(seed: u64, t: usize, f: usize) -> ComplexSpectrogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((t, f), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        ComplexSpectrogram { data, cfg: StftConfig::desk(), sample_rate: 8_000, compressed: false }
    }

    #[test]
    fn rm_of_identical_spectra_is_one() {
        let n = grid(1, 4, 6);
        let m = oracle_rm(&n, &n).unwrap();
        assert!(m.planes.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rm_of_half_amplitude_is_half_and_crm_is_real_half() {
        let n = grid(2, 4, 6);
        let mut c = n.clone();
        c.data.mapv_inplace(|z| 0.5 * z);
        let rm = oracle_rm(&c, &n).unwrap();
        assert!(rm.planes.iter().all(|v| (v - 0.5).abs() < 1e-12));
        let crm = oracle_crm(&c, &n).unwrap();
        for t in 0..4 {
            for f in 0..6 {
                assert!((crm.planes[(t, f, 0)] - 0.5).abs() < 1e-12);
                assert!(crm.planes[(t, f, 1)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rm_clips_to_unity() {
        let n = grid(3, 3, 3);
        let mut c = n.clone();
        c.data.mapv_inplace(|z| 2.0 * z);
        let rm = oracle_rm(&c, &n).unwrap();
        assert!(rm.planes.iter().all(|v| (*v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn crm_quotient_hand_value() {
        // (1 + i) / (2i) = (0.5, -0.5)
        let mut n = grid(4, 1, 1);
        let mut c = n.clone();
        c.data[(0, 0)] = Complex64::new(1.0, 1.0);
        n.data[(0, 0)] = Complex64::new(0.0, 2.0);
        let m = oracle_crm(&c, &n).unwrap();
        assert!((m.planes[(0, 0, 0)] - 0.5).abs() < 1e-12);
        assert!((m.planes[(0, 0, 1)] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn apply_rm_keeps_phase_exactly() {
        let n = grid(5, 6, 8);
        let c = grid(6, 6, 8);
        let m = oracle_rm(&c, &n).unwrap();
        let out = apply_rm(&m, &n).unwrap();
        for (a, b) in out.data.iter().zip(n.data.iter()) {
            if a.norm() > 0.0 {
                let d = (a.arg() - b.arg()).abs();
                assert!(d < 1e-12, "phase moved by {d}");
            }
        }
    }

    #[test]
    fn crm_reconstructs_clean_exactly() {
        let n = grid(7, 6, 8);
        let c = grid(8, 6, 8);
        let m = oracle_crm(&c, &n).unwrap();
        let out = apply_crm(&m, &n).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in out.data.iter().zip(c.data.iter()) {
            worst = worst.max((a - b).norm() / (1.0 + b.norm()));
        }
        assert!(worst <= 1e-9, "reconstruction error {worst}");
    }

    #[test]
    fn rm_is_lossy_where_phases_collide_crm_is_not() {
        // Two overlapping signals: the magnitude ratio cannot undo phase,
        // the complex ratio can.
        let sr = 8_000;
        let cfg = StftConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = Waveform::new((0..8_000).map(|_| rng.gen_range(-0.3..0.3)).collect(), sr).unwrap();
        let i = Waveform::new((0..8_000).map(|_| rng.gen_range(-0.3..0.3)).collect(), sr).unwrap();
        let n = Waveform::sum(&[&c, &i]).unwrap();
        let sc = stft(&c, &cfg).unwrap();
        let sn = stft(&n, &cfg).unwrap();

        let rm_err: f64 = apply_rm(&oracle_rm(&sc, &sn).unwrap(), &sn)
            .unwrap()
            .data
            .iter()
            .zip(sc.data.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let crm_err: f64 = apply_crm(&oracle_crm(&sc, &sn).unwrap(), &sn)
            .unwrap()
            .data
            .iter()
            .zip(sc.data.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        assert!(crm_err < 1e-18);
        assert!(rm_err > 1e-3, "expected overlap loss, got {rm_err}");
    }

    #[test]
    fn sigmoid_round_trip_and_midpoint() {
        let mut m = oracle_crm(&grid(10, 3, 4), &grid(11, 3, 4)).unwrap();
        m.planes.mapv_inplace(|x| x.clamp(-9.0, 9.0));
        m.planes[(0, 0, 0)] = 0.0;
        let c = m.sigmoid_compress().unwrap();
        assert!((c.planes[(0, 0, 0)] - 0.5).abs() < 1e-15);
        assert!(c.planes.iter().all(|v| (0.0..1.0).contains(v)));
        let back = c.sigmoid_decompress().unwrap();
        let mut worst = 0.0f64;
        for (a, b) in back.planes.iter().zip(m.planes.iter()) {
            worst = worst.max((a - b).abs() / (1.0 + b.abs()));
        }
        assert!(worst <= 1e-9, "round trip error {worst}");
    }

    #[test]
    fn decompress_clips_saturated_bins() {
        let mut m = oracle_rm(&grid(12, 2, 2), &grid(13, 2, 2)).unwrap();
        m.planes.fill(0.0);
        let mut c = m.sigmoid_compress().unwrap();
        c.planes[(0, 0, 0)] = 1.0 - 1e-12; // saturated
        c.planes[(0, 1, 0)] = 1e-12;
        let d = c.sigmoid_decompress().unwrap();
        assert_eq!(d.planes[(0, 0, 0)], LOGIT_CLIP);
        assert_eq!(d.planes[(0, 1, 0)], -LOGIT_CLIP);
    }

    #[test]
    fn state_and_shape_guards() {
        let n = grid(14, 3, 4);
        let c = grid(15, 4, 4);
        assert!(oracle_rm(&c, &n).is_err());
        let m = oracle_rm(&n, &n).unwrap();
        assert!(apply_crm(&m, &n).is_err()); // wrong kind
        let mc = m.sigmoid_compress().unwrap();
        assert!(apply_rm(&mc, &n).is_err()); // compressed mask
        assert!(mc.sigmoid_compress().is_err());
        assert!(m.sigmoid_decompress().is_err());
    }

    #[test]
    fn matrix_flattening_layout() {
        let m = oracle_crm(&grid(16, 2, 3), &grid(17, 2, 3)).unwrap();
        let mat = m.to_matrix();
        assert_eq!(mat.dim(), (2, 6));
        assert!((mat[(1, 2 * 2 + 1)] as f64 - m.planes[(1, 2, 1)]).abs() < 1e-6);
    }
}
