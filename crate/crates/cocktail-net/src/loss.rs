//! Separation loss: squared error between power-law-compressed masked
//! mixtures and compressed clean targets, with permutation-invariant
//! assignment of speaker streams.
//!
//! Two routes compute the same quantity:
//!
//! * [`separation_loss`] / [`pit_separation_loss`] are pure spectrogram ops
//!   built directly on the signal crate's mask and compression primitives —
//!   the reference semantics used by evaluation and oracle tests.
//! * [`pit_loss_head`] is the differentiable training objective.  It reads
//!   the *pre-sigmoid* head activations, exploiting that the network's
//!   sigmoid and the mask logit decompression cancel exactly, and floors the
//!   compression radius at [`R_FLOOR`] so gradients stay bounded at silent
//!   bins.  Away from the floor and the logit clip the two routes agree to
//!   rounding error.

use ndarray::{s, Array2};

use cocktail_dsp::mask::{apply_crm, apply_rm, MaskKind, TFMask, LOGIT_CLIP};
use cocktail_dsp::spectral::ComplexSpectrogram;
use cocktail_dsp::{Complex64, DspError};

use crate::error::{NetError, Result};
use crate::model::ModelConfig;

/// Magnitude floor inside the differentiable compression: below this radius
/// the power law is replaced by its linearization, keeping the Jacobian
/// finite (the exact power law has unbounded slope at zero for p < 1).
pub const R_FLOOR: f64 = 1e-4;

/// Streams beyond this defeat brute-force permutation search.
pub const PERMUTATION_LIMIT: usize = 4;

/// All permutations of `0..n` in lexicographic-ish construction order.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for tail in permutations(n - 1) {
        for pos in 0..=tail.len() {
            let mut p = tail.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

fn check_streams(n: usize) -> Result<()> {
    if n > PERMUTATION_LIMIT {
        return Err(NetError::TooManyStreams {
            got: n,
            limit: PERMUTATION_LIMIT,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Pure spectrogram-domain ops
// ---------------------------------------------------------------------------

/// Mean squared compressed-domain error of one (mask, target) pair:
/// `Σ |compress(apply(decompress(mask), noisy)) − compress(target)|² / (T·F)`.
fn pair_loss(mask: &TFMask, noisy: &ComplexSpectrogram, target: &ComplexSpectrogram) -> Result<f64> {
    let raw = mask.sigmoid_decompress()?;
    let masked = match raw.kind {
        MaskKind::Ratio => apply_rm(&raw, noisy)?,
        MaskKind::ComplexRatio => apply_crm(&raw, noisy)?,
    };
    let pred = masked.compress()?;
    let tgt = target.compress()?;
    if pred.data.dim() != tgt.data.dim() {
        return Err(NetError::Dsp(DspError::ShapeMismatch {
            context: "loss target",
            a: pred.data.dim(),
            b: tgt.data.dim(),
        }));
    }
    let n = (pred.data.nrows() * pred.data.ncols()) as f64;
    let sum: f64 = pred
        .data
        .iter()
        .zip(tgt.data.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(sum / n)
}

/// Fixed-assignment separation loss: mask `i` reconstructs target `i`;
/// the result is the mean of the per-pair losses.
pub fn separation_loss(
    masks: &[&TFMask],
    noisy: &ComplexSpectrogram,
    targets: &[&ComplexSpectrogram],
) -> Result<f64> {
    if masks.len() != targets.len() || masks.is_empty() {
        return Err(NetError::CountMismatch {
            context: "loss targets",
            need: masks.len().max(1),
            got: targets.len(),
        });
    }
    let mut total = 0.0;
    for (m, t) in masks.iter().zip(targets) {
        total += pair_loss(m, noisy, t)?;
    }
    Ok(total / masks.len() as f64)
}

/// Permutation-invariant separation loss: the target assignment minimizing
/// the mean pair loss, found by brute-force enumeration.  Returns the loss
/// and the winning assignment (`perm[i]` is the target index mask `i`
/// reconstructs).
pub fn pit_separation_loss(
    masks: &[&TFMask],
    noisy: &ComplexSpectrogram,
    targets: &[&ComplexSpectrogram],
) -> Result<(f64, Vec<usize>)> {
    if masks.len() != targets.len() || masks.is_empty() {
        return Err(NetError::CountMismatch {
            context: "loss targets",
            need: masks.len().max(1),
            got: targets.len(),
        });
    }
    check_streams(masks.len())?;
    let n = masks.len();
    let mut matrix = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            matrix[(i, j)] = pair_loss(masks[i], noisy, targets[j])?;
        }
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in permutations(n) {
        let loss: f64 = perm.iter().enumerate().map(|(i, &j)| matrix[(i, j)]).sum::<f64>() / n as f64;
        if best.as_ref().map_or(true, |(b, _)| loss < *b) {
            best = Some((loss, perm));
        }
    }
    Ok(best.expect("non-empty permutation set"))
}

// ---------------------------------------------------------------------------
// Differentiable head
// ---------------------------------------------------------------------------

/// Loss and head gradient of one (head, target) pair.
///
/// `u_head` is the pre-sigmoid slice `[T, n_freq·planes]`; the decompressed
/// mask is `clamp(u, ±LOGIT_CLIP)` because logit ∘ sigmoid is the identity.
/// Returns the mean pair loss and `dL/du_head` (unscaled by the head count).
fn head_pair(
    u_head: ndarray::ArrayView2<f64>,
    kind: MaskKind,
    noisy: &ComplexSpectrogram,
    target: &Array2<Complex64>,
) -> (f64, Array2<f64>) {
    let p = noisy.cfg.p;
    let (t_len, f_len) = noisy.data.dim();
    let mut du = Array2::zeros(u_head.dim());
    let mut sum = 0.0;
    let norm = (t_len * f_len) as f64;
    for t in 0..t_len {
        for f in 0..f_len {
            let z = noisy.data[(t, f)];
            // Mask value and clip gates per plane.
            let (m, gate_re, gate_im) = match kind {
                MaskKind::Ratio => {
                    let ur = u_head[(t, f)];
                    (
                        Complex64::new(ur.clamp(-LOGIT_CLIP, LOGIT_CLIP), 0.0),
                        ur.abs() < LOGIT_CLIP,
                        false,
                    )
                }
                MaskKind::ComplexRatio => {
                    let ur = u_head[(t, 2 * f)];
                    let ui = u_head[(t, 2 * f + 1)];
                    (
                        Complex64::new(
                            ur.clamp(-LOGIT_CLIP, LOGIT_CLIP),
                            ui.clamp(-LOGIT_CLIP, LOGIT_CLIP),
                        ),
                        ur.abs() < LOGIT_CLIP,
                        ui.abs() < LOGIT_CLIP,
                    )
                }
            };
            let s_hat = m * z;
            let r = s_hat.norm().max(R_FLOOR);
            let scale = r.powf(p - 1.0);
            let c = s_hat * scale;
            let e = c - target[(t, f)];
            sum += e.norm_sqr();
            // dL/dc = 2e; chain through the floored power law:
            // J = scale·I + (p−1)·r^{p−3}·ŝŝᵀ  (identity-only below the floor).
            let two_e = 2.0 * e;
            let ds_hat = if s_hat.norm() > R_FLOOR {
                let dot = s_hat.re * two_e.re + s_hat.im * two_e.im;
                two_e * scale + s_hat * ((p - 1.0) * r.powf(p - 3.0) * dot)
            } else {
                two_e * scale
            };
            // ŝ = M·z  ⇒  dM = dŝ·conj(z).
            let dm = ds_hat * z.conj();
            match kind {
                MaskKind::Ratio => {
                    if gate_re {
                        du[(t, f)] = dm.re / norm;
                    }
                }
                MaskKind::ComplexRatio => {
                    if gate_re {
                        du[(t, 2 * f)] = dm.re / norm;
                    }
                    if gate_im {
                        du[(t, 2 * f + 1)] = dm.im / norm;
                    }
                }
            }
        }
    }
    (sum / norm, du)
}

/// Shared argument validation for the differentiable heads; returns the
/// clip length.
fn validate_head(
    u: &Array2<f64>,
    cfg: &ModelConfig,
    noisy: &ComplexSpectrogram,
    speaker_targets: &[Array2<Complex64>],
    noise_target: Option<&Array2<Complex64>>,
) -> Result<usize> {
    if noisy.compressed {
        return Err(NetError::Dsp(DspError::CompressionState { expected: false }));
    }
    let (t_len, f_len) = noisy.data.dim();
    if f_len != cfg.n_freq || u.dim() != (t_len, cfg.head_dim()) {
        return Err(NetError::CountMismatch {
            context: "head dimensions",
            need: t_len * cfg.head_dim(),
            got: u.len(),
        });
    }
    if speaker_targets.len() != cfg.n_speaker_streams {
        return Err(NetError::CountMismatch {
            context: "speaker targets",
            need: cfg.n_speaker_streams,
            got: speaker_targets.len(),
        });
    }
    if noise_target.is_some() != cfg.predicts_noise_mask {
        return Err(NetError::InvalidConfig(
            "noise target must be supplied exactly when the model predicts a noise mask".into(),
        ));
    }
    for tgt in speaker_targets.iter().chain(noise_target) {
        if tgt.dim() != (t_len, f_len) {
            return Err(NetError::Dsp(DspError::ShapeMismatch {
                context: "loss target",
                a: (t_len, f_len),
                b: tgt.dim(),
            }));
        }
    }
    Ok(t_len)
}

/// Differentiable permutation-invariant loss on the pre-sigmoid head.
///
/// `u` is the network head `[frames, head_dim]` (see
/// [`Tape::u`](crate::model::Tape)); `speaker_targets` are the compressed
/// clean spectrogram grids in stream order; `noise_target` must be present
/// exactly when the model predicts a noise mask (that head is assigned
/// fixed, not permuted).  Returns the scalar loss, `dL/du`, and the winning
/// speaker assignment.
pub fn pit_loss_head(
    u: &Array2<f64>,
    cfg: &ModelConfig,
    noisy: &ComplexSpectrogram,
    speaker_targets: &[Array2<Complex64>],
    noise_target: Option<&Array2<Complex64>>,
) -> Result<(f64, Array2<f64>, Vec<usize>)> {
    validate_head(u, cfg, noisy, speaker_targets, noise_target)?;
    let n_sp = cfg.n_speaker_streams;
    check_streams(n_sp)?;
    let per_head = cfg.n_freq * cfg.mask_kind.planes();

    // Loss and gradient for every (speaker head, speaker target) pair.
    let mut pair: Vec<Vec<(f64, Array2<f64>)>> = Vec::with_capacity(n_sp);
    for h in 0..n_sp {
        let u_head = u.slice(s![.., h * per_head..(h + 1) * per_head]);
        pair.push(
            speaker_targets
                .iter()
                .map(|tgt| head_pair(u_head, cfg.mask_kind, noisy, tgt))
                .collect(),
        );
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in permutations(n_sp) {
        let loss: f64 = perm.iter().enumerate().map(|(h, &k)| pair[h][k].0).sum();
        if best.as_ref().map_or(true, |(b, _)| loss < *b) {
            best = Some((loss, perm));
        }
    }
    let (speaker_sum, perm) = best.expect("non-empty permutation set");

    let n_heads = cfg.n_masks() as f64;
    let mut du = Array2::zeros(u.dim());
    let mut total = speaker_sum;
    for (h, &k) in perm.iter().enumerate() {
        let scaled = &pair[h][k].1 / n_heads;
        du.slice_mut(s![.., h * per_head..(h + 1) * per_head])
            .assign(&scaled);
    }
    if let Some(tgt) = noise_target {
        let h = n_sp;
        let u_head = u.slice(s![.., h * per_head..(h + 1) * per_head]);
        let (l, g) = head_pair(u_head, cfg.mask_kind, noisy, tgt);
        total += l;
        du.slice_mut(s![.., h * per_head..(h + 1) * per_head])
            .assign(&(&g / n_heads));
    }
    Ok((total / n_heads, du, perm))
}

/// Differentiable fixed-assignment loss on the pre-sigmoid head.
///
/// Pairs speaker head `i` directly with `speaker_targets[i]` — the
/// stream-to-source order the visual inputs impose — with no permutation
/// search.  Same validation and pair arithmetic as
/// [`pit_loss_head`]; equals it whenever the identity assignment is the
/// permutation optimum.
pub fn ordered_loss_head(
    u: &Array2<f64>,
    cfg: &ModelConfig,
    noisy: &ComplexSpectrogram,
    speaker_targets: &[Array2<Complex64>],
    noise_target: Option<&Array2<Complex64>>,
) -> Result<(f64, Array2<f64>)> {
    validate_head(u, cfg, noisy, speaker_targets, noise_target)?;
    let per_head = cfg.n_freq * cfg.mask_kind.planes();
    let n_heads = cfg.n_masks() as f64;
    let mut du = Array2::zeros(u.dim());
    let mut total = 0.0;
    let fixed_pairs = speaker_targets.iter().chain(noise_target);
    for (h, tgt) in fixed_pairs.enumerate() {
        let u_head = u.slice(s![.., h * per_head..(h + 1) * per_head]);
        let (l, g) = head_pair(u_head, cfg.mask_kind, noisy, tgt);
        total += l;
        du.slice_mut(s![.., h * per_head..(h + 1) * per_head])
            .assign(&(&g / n_heads));
    }
    Ok((total / n_heads, du))
}
