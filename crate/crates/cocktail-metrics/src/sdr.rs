//! Projection-based signal-to-distortion ratio.
//!
//! An estimate is split into four additive parts by projecting it onto a
//! sequence of nested subspaces built from the reference signals:
//!
//! * `s_target` — the part explained by the target alone,
//! * `e_interf` — the extra part explained once the other sources are added,
//! * `e_noise`  — the extra part explained once the noise bed is added,
//! * `e_artif`  — everything left over.
//!
//! Each later component is orthogonal to every subspace fitted before it, and
//! the four parts sum back to the estimate exactly (up to floating-point
//! round-off).  The decomposition uses a single time-invariant gain per basis
//! direction; no filtering is applied to the references.

use cocktail_dsp::Waveform;

use crate::error::{MetricsError, Result};

/// SDR values are capped to this magnitude so that perfect (or hopeless)
/// estimates stay finite and comparable.
pub const SDR_CAP_DB: f64 = 100.0;

/// A basis vector is dropped as linearly dependent when orthogonalization
/// leaves it with less than this fraction of its original norm.
const RANK_TOL: f64 = 1e-10;

/// The additive split of an estimate against its references.
#[derive(Debug, Clone)]
pub struct SdrDecomposition {
    /// Component of the estimate along the target.
    pub s_target: Vec<f64>,
    /// Component explained by the other sources (orthogonal to the target).
    pub e_interf: Vec<f64>,
    /// Component explained by the noise bed (orthogonal to target + others).
    pub e_noise: Vec<f64>,
    /// Residual not explained by any reference.
    pub e_artif: Vec<f64>,
    /// `10 log10(‖s_target‖² / ‖e_interf + e_noise + e_artif‖²)`, capped.
    pub sdr_db: f64,
}

impl SdrDecomposition {
    /// Energy of each component, in decomposition order.
    pub fn energies(&self) -> [f64; 4] {
        [
            dot(&self.s_target, &self.s_target),
            dot(&self.e_interf, &self.e_interf),
            dot(&self.e_noise, &self.e_noise),
            dot(&self.e_artif, &self.e_artif),
        ]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_len(context: &'static str, need: usize, got: usize) -> Result<()> {
    if need == got {
        Ok(())
    } else {
        Err(MetricsError::LengthMismatch { context, need, got })
    }
}

/// Append `raw` to `basis` after orthogonalizing it against every vector
/// already present.  Runs two passes of modified Gram-Schmidt so the basis
/// stays orthonormal to machine precision; vectors that lose essentially all
/// of their norm are dropped as linearly dependent.
fn push_orthonormal(basis: &mut Vec<Vec<f64>>, raw: &[f64]) {
    let norm_raw = dot(raw, raw).sqrt();
    if norm_raw == 0.0 {
        return;
    }
    let mut v = raw.to_vec();
    for _ in 0..2 {
        for q in basis.iter() {
            let c = dot(&v, q);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
        }
    }
    let norm_v = dot(&v, &v).sqrt();
    if norm_v > RANK_TOL * norm_raw {
        for vi in v.iter_mut() {
            *vi /= norm_v;
        }
        basis.push(v);
    }
}

/// Accumulate the projection of `estimate` onto `basis[range]` into `out`.
fn project_into(out: &mut [f64], estimate: &[f64], basis: &[Vec<f64>], range: std::ops::Range<usize>) {
    for q in &basis[range] {
        let c = dot(estimate, q);
        for (oi, qi) in out.iter_mut().zip(q) {
            *oi += c * qi;
        }
    }
}

/// Decompose `estimate` against a target, the remaining sources, and an
/// optional noise reference.  All signals must share the estimate's length.
///
/// Returns [`MetricsError::DegenerateReference`] when the target has zero
/// energy, since no meaningful projection exists in that case.
pub fn decompose(
    estimate: &Waveform,
    target: &Waveform,
    others: &[&Waveform],
    noise: Option<&Waveform>,
) -> Result<SdrDecomposition> {
    let n = estimate.len();
    check_len("target", n, target.len())?;
    for o in others {
        check_len("other source", n, o.len())?;
    }
    if let Some(nz) = noise {
        check_len("noise", n, nz.len())?;
    }
    if target.energy() == 0.0 {
        return Err(MetricsError::DegenerateReference);
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(2 + others.len());
    push_orthonormal(&mut basis, target.samples());
    debug_assert_eq!(basis.len(), 1);
    for o in others {
        push_orthonormal(&mut basis, o.samples());
    }
    let interf_end = basis.len();
    if let Some(nz) = noise {
        push_orthonormal(&mut basis, nz.samples());
    }

    let e = estimate.samples();
    let mut s_target = vec![0.0; n];
    let mut e_interf = vec![0.0; n];
    let mut e_noise = vec![0.0; n];
    project_into(&mut s_target, e, &basis, 0..1);
    project_into(&mut e_interf, e, &basis, 1..interf_end);
    project_into(&mut e_noise, e, &basis, interf_end..basis.len());

    let e_artif: Vec<f64> = (0..n)
        .map(|i| e[i] - s_target[i] - e_interf[i] - e_noise[i])
        .collect();

    let signal = dot(&s_target, &s_target);
    let distortion: f64 = (0..n)
        .map(|i| {
            let d = e_interf[i] + e_noise[i] + e_artif[i];
            d * d
        })
        .sum();
    let sdr_db = ratio_db(signal, distortion);

    Ok(SdrDecomposition {
        s_target,
        e_interf,
        e_noise,
        e_artif,
        sdr_db,
    })
}

/// `10 log10(num / den)` capped to `±SDR_CAP_DB`, with the conventions that a
/// zero numerator gives the floor and a zero denominator the ceiling.
fn ratio_db(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        return -SDR_CAP_DB;
    }
    if den <= 0.0 {
        return SDR_CAP_DB;
    }
    (10.0 * (num / den).log10()).clamp(-SDR_CAP_DB, SDR_CAP_DB)
}

/// Signal-to-distortion ratio of `estimate` in decibels, capped to
/// `±SDR_CAP_DB`.
pub fn sdr(
    estimate: &Waveform,
    target: &Waveform,
    others: &[&Waveform],
    noise: Option<&Waveform>,
) -> Result<f64> {
    Ok(decompose(estimate, target, others, noise)?.sdr_db)
}

/// SDR gain of `enhanced` over `mixture`, both measured against the same
/// references: `sdr(enhanced) − sdr(mixture)`.
pub fn sdr_improvement(
    enhanced: &Waveform,
    mixture: &Waveform,
    target: &Waveform,
    others: &[&Waveform],
    noise: Option<&Waveform>,
) -> Result<f64> {
    let after = sdr(enhanced, target, others, noise)?;
    let before = sdr(mixture, target, others, noise)?;
    Ok(after - before)
}
