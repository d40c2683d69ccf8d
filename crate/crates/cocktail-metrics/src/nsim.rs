//! Spectrogram similarity in the style of the neurogram similarity index.
//!
//! Two power-law-compressed magnitude grids are normalized by the reference
//! maximum, tiled into non-overlapping patches, and each patch is scored by a
//! luminance term (comparing means) times a structure term (comparing
//! correlations).  The reported value is the mean over patches.
//!
//! Grid cells that do not fill a complete patch are dropped.  Identical
//! inputs score exactly 1.0; the per-patch value never exceeds 1 apart from
//! floating-point round-off.

use cocktail_dsp::ComplexSpectrogram;
use ndarray::s;

use crate::error::{MetricsError, Result};

/// Configuration for the patch similarity score.
///
/// The stabilization constants follow the structural-similarity convention
/// for signals normalized to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsimConfig {
    /// Patch extent along the time axis, in frames.
    pub patch_frames: usize,
    /// Patch extent along the frequency axis, in bins; `None` spans the full
    /// band.
    pub patch_bins: Option<usize>,
    /// Luminance stabilization constant.
    pub c1: f64,
    /// Structure stabilization constant.
    pub c2: f64,
}

impl Default for NsimConfig {
    fn default() -> Self {
        NsimConfig {
            patch_frames: 30,
            patch_bins: None,
            c1: 0.01,
            c2: 0.03,
        }
    }
}

/// Patch-averaged similarity between a reference and a degraded spectrogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsimScore {
    /// Mean per-patch similarity; 1.0 exactly for identical inputs.
    pub value: f64,
    /// Patch-averaged reference mean.
    pub mu_r: f64,
    /// Patch-averaged degraded mean.
    pub mu_d: f64,
    /// Patch-averaged covariance between reference and degraded cells.
    pub sigma_rd: f64,
    /// Luminance constant used.
    pub c1: f64,
    /// Structure constant used.
    pub c2: f64,
}

fn check_axis(axis: &'static str, patch: usize, grid: usize) -> Result<()> {
    if patch == 0 || patch > grid {
        Err(MetricsError::PatchTooLarge { axis, patch, grid })
    } else {
        Ok(())
    }
}

/// Similarity of `degraded` against `reference` on compressed magnitude
/// grids.
///
/// Both spectrograms must be power-law compressed and share a shape; the
/// patch must fit inside the grid on both axes.
pub fn nsim(
    reference: &ComplexSpectrogram,
    degraded: &ComplexSpectrogram,
    cfg: &NsimConfig,
) -> Result<NsimScore> {
    if !reference.compressed || !degraded.compressed {
        return Err(MetricsError::CompressionState);
    }
    let shape_r = (reference.n_frames(), reference.n_freq());
    let shape_d = (degraded.n_frames(), degraded.n_freq());
    if shape_r != shape_d {
        return Err(MetricsError::ShapeMismatch {
            a: shape_r,
            b: shape_d,
        });
    }
    let (n_frames, n_freq) = shape_r;
    let patch_frames = cfg.patch_frames;
    let patch_bins = cfg.patch_bins.unwrap_or(n_freq);
    check_axis("frames", patch_frames, n_frames)?;
    check_axis("bins", patch_bins, n_freq)?;

    let mut ref_mag = reference.magnitude();
    let mut deg_mag = degraded.magnitude();
    let ref_max = ref_mag.iter().fold(0.0_f64, |m, &x| m.max(x));
    if ref_max > 0.0 {
        ref_mag.mapv_inplace(|x| x / ref_max);
        deg_mag.mapv_inplace(|x| x / ref_max);
    }

    let mut sum_value = 0.0;
    let mut sum_mu_r = 0.0;
    let mut sum_mu_d = 0.0;
    let mut sum_sigma_rd = 0.0;
    let mut patches = 0usize;
    for f0 in (0..=n_frames - patch_frames).step_by(patch_frames) {
        // Drop trailing frames that do not fill a patch.
        for b0 in (0..=n_freq - patch_bins).step_by(patch_bins) {
            let r = ref_mag.slice(s![f0..f0 + patch_frames, b0..b0 + patch_bins]);
            let d = deg_mag.slice(s![f0..f0 + patch_frames, b0..b0 + patch_bins]);
            let n = (patch_frames * patch_bins) as f64;
            let mu_r = r.iter().sum::<f64>() / n;
            let mu_d = d.iter().sum::<f64>() / n;
            let mut var_r = 0.0;
            let mut var_d = 0.0;
            let mut cov = 0.0;
            for (&rv, &dv) in r.iter().zip(d.iter()) {
                let xr = rv - mu_r;
                let xd = dv - mu_d;
                var_r += xr * xr;
                var_d += xd * xd;
                cov += xr * xd;
            }
            var_r /= n;
            var_d /= n;
            cov /= n;

            let luminance = (2.0 * mu_r * mu_d + cfg.c1) / (mu_r * mu_r + mu_d * mu_d + cfg.c1);
            // The denominator uses sqrt(var_r · var_d) so that identical
            // patches (var_r, var_d, cov all the same value) score 1 exactly.
            let structure = (cov + cfg.c2) / ((var_r * var_d).sqrt() + cfg.c2);
            sum_value += luminance * structure;
            sum_mu_r += mu_r;
            sum_mu_d += mu_d;
            sum_sigma_rd += cov;
            patches += 1;
        }
    }
    let k = patches as f64;
    Ok(NsimScore {
        value: sum_value / k,
        mu_r: sum_mu_r / k,
        mu_d: sum_mu_d / k,
        sigma_rd: sum_sigma_rd / k,
        c1: cfg.c1,
        c2: cfg.c2,
    })
}
