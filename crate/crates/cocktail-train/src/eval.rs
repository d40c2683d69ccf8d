//! Held-out-split evaluation: fixed-order scoring for audio-visual models,
//! best-permutation scoring for the audio-only baseline, oracle-mask
//! reference pipelines, and a pitch-pool breakdown of the improvement.

use cocktail_corpus::{CorpusManifest, MixtureSample, Split, Task};
use cocktail_dsp::mask::{apply_crm, apply_rm, oracle_crm, oracle_rm};
use cocktail_dsp::par::par_map;
use cocktail_dsp::spectral::{istft, stft, ComplexSpectrogram, StftConfig};
use cocktail_dsp::{Complex64, Waveform};
use cocktail_metrics::{nsim, sdr, Enhancer, EvalRow, MetricsError, NsimConfig};
use cocktail_net::AudioVisualModel;

use crate::data::protocol_for;
use crate::error::{Result, TrainError};
use crate::separate::{separate, separate_streams};

/// Boundary between the low- and high-pitch reporting pools: the geometric
/// midpoint of the synthesis f0 range (85..255 Hz).
pub const LOW_F0_SPLIT_HZ: f64 = 147.2; // sqrt(85 * 255), rounded

/// Aggregate results over one task's test split.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub task: Task,
    /// Mixtures evaluated (each contributes one row per speaker).
    pub n_samples: usize,
    pub mean_sdr_improvement_db: f64,
    /// Fraction of samples whose every output channel scores best against
    /// its own source; `None` for permutation-scored models and
    /// single-speaker tasks.
    pub assignment_accuracy: Option<f64>,
    pub mean_nsim: f64,
    /// Mean improvement over sources with estimated f0 below
    /// [`LOW_F0_SPLIT_HZ`]; `None` when the pool is empty.
    pub low_f0_mean_db: Option<f64>,
    /// Counterpart pool at or above the split.
    pub high_f0_mean_db: Option<f64>,
    pub rows: Vec<EvalRow>,
}

/// Scores for one mixture.
struct SampleScore {
    rows: Vec<EvalRow>,
    /// Reference f0 per row, where estimable.
    f0: Vec<Option<f64>>,
    correct: Option<bool>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn assemble(task: Task, scores: Vec<SampleScore>) -> EvalReport {
    let n_samples = scores.len();
    let correct: Vec<bool> = scores.iter().filter_map(|s| s.correct).collect();
    let assignment_accuracy = (!correct.is_empty())
        .then(|| correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64);
    let mut rows = Vec::new();
    let mut f0 = Vec::new();
    for s in scores {
        rows.extend(s.rows);
        f0.extend(s.f0);
    }
    let pool = |low: bool| {
        mean(rows.iter().zip(&f0).filter_map(|(r, f)| {
            f.filter(|f| (*f < LOW_F0_SPLIT_HZ) == low)
                .map(|_| r.sdr_improvement_db)
        }))
    };
    EvalReport {
        task,
        n_samples,
        mean_sdr_improvement_db: mean(rows.iter().map(|r| r.sdr_improvement_db)).unwrap_or(0.0),
        assignment_accuracy,
        mean_nsim: mean(rows.iter().map(|r| r.nsim_mean)).unwrap_or(0.0),
        low_f0_mean_db: pool(true),
        high_f0_mean_db: pool(false),
        rows,
    }
}

/// All permutations of `0..n` in lexicographic order.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for lead in 0..n {
        for mut rest in permutations(n - 1) {
            for v in &mut rest {
                if *v >= lead {
                    *v += 1;
                }
            }
            let mut p = vec![lead];
            p.append(&mut rest);
            out.push(p);
        }
    }
    out
}

/// Score one sample's estimates against its references.
///
/// `ordered` keeps the fixed channel-to-source pairing and reports whether
/// every channel beat the alternatives; otherwise the best total-SDR
/// assignment is searched, mirroring manual channel assignment.
fn score_sample(
    sample_id: &str,
    sample: &MixtureSample,
    estimates: &[Waveform],
    ordered: bool,
) -> Result<SampleScore> {
    let n = sample.n_speakers();
    assert_eq!(estimates.len(), n, "one estimate per speaker");
    let noise = sample.noise.as_ref();

    // Full channel-vs-source SDR matrix.
    let mut m = vec![vec![0.0; n]; n];
    let mut input = vec![0.0; n];
    for j in 0..n {
        let others: Vec<&Waveform> = (0..n).filter(|&o| o != j).map(|o| &sample.speech[o]).collect();
        input[j] = sdr(&sample.mixture, &sample.speech[j], &others, noise)?;
        for (i, est) in estimates.iter().enumerate() {
            m[i][j] = sdr(est, &sample.speech[j], &others, noise)?;
        }
    }

    let (assignment, correct) = if ordered {
        let correct = (n > 1).then(|| {
            (0..n).all(|i| (0..n).filter(|&j| j != i).all(|j| m[i][i] > m[i][j]))
        });
        ((0..n).collect::<Vec<usize>>(), correct)
    } else {
        let best = permutations(n)
            .into_iter()
            .max_by(|a, b| {
                let sa: f64 = (0..n).map(|j| m[a[j]][j]).sum();
                let sb: f64 = (0..n).map(|j| m[b[j]][j]).sum();
                sa.partial_cmp(&sb).expect("finite SDRs")
            })
            .expect("at least one permutation");
        (best, None)
    };

    let cfg = StftConfig::for_rate(sample.mixture.sample_rate());
    let nsim_cfg = NsimConfig::default();
    let mut rows = Vec::with_capacity(n);
    let mut f0 = Vec::with_capacity(n);
    for j in 0..n {
        let est = &estimates[assignment[j]];
        let ref_spec = stft(&sample.speech[j], &cfg)?.compress()?;
        let est_spec = stft(est, &cfg)?.compress()?;
        let similarity = nsim(&ref_spec, &est_spec, &nsim_cfg)?;
        rows.push(EvalRow {
            sample_id: format!("{sample_id}:s{j}"),
            task: sample.task.tag().to_string(),
            sdr_in_db: input[j],
            sdr_out_db: m[assignment[j]][j],
            sdr_improvement_db: m[assignment[j]][j] - input[j],
            nsim_mean: similarity.value,
        });
        f0.push(estimate_f0(&sample.speech[j]));
    }
    Ok(SampleScore { rows, f0, correct })
}

fn test_entries<'m>(
    manifest: &'m CorpusManifest,
    task: Task,
) -> Result<Vec<&'m cocktail_corpus::ManifestEntry>> {
    let entries: Vec<_> = manifest
        .split(Split::Test)
        .into_iter()
        .filter(|e| e.task == task)
        .collect();
    if entries.is_empty() {
        return Err(TrainError::EmptySplit {
            task: task.tag(),
            split: "test",
        });
    }
    Ok(entries)
}

/// Evaluate a trained model over one task's test split.
///
/// Audio-visual channels are scored against their own source in fixed order
/// (no permutation search); the audio-only baseline is granted the best
/// assignment, the analog of pairing its unordered outputs by hand.
pub fn evaluate(
    model: &AudioVisualModel,
    manifest: &CorpusManifest,
    task: Task,
) -> Result<EvalReport> {
    protocol_for(&model.config, task)?;
    let ordered = !model.config.audio_only;
    let entries = test_entries(manifest, task)?;
    let scores = par_map(entries.len(), |i| -> Result<SampleScore> {
        let entry = entries[i];
        let sample = manifest.load_sample(entry)?;
        let estimates = separate(model, &sample)?;
        score_sample(&entry.path, &sample, &estimates, ordered)
    });
    let scores: Vec<SampleScore> = scores.into_iter().collect::<Result<_>>()?;
    Ok(assemble(task, scores))
}

/// Ideal-mask reference pipelines, scored like an ordered model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleSeparator {
    /// Magnitude ratio mask applied to noisy bins (noisy phase kept).
    RatioNoisyPhase,
    /// Complex ratio mask: magnitude and phase both corrected.
    ComplexRatio,
    /// Ratio-mask magnitude with the reference's phase substituted.
    RatioOraclePhase,
}

fn oracle_estimate(
    which: OracleSeparator,
    clean: &ComplexSpectrogram,
    noisy: &ComplexSpectrogram,
    out_len: usize,
) -> Result<Waveform> {
    let spec = match which {
        OracleSeparator::RatioNoisyPhase => apply_rm(&oracle_rm(clean, noisy)?, noisy)?,
        OracleSeparator::ComplexRatio => apply_crm(&oracle_crm(clean, noisy)?, noisy)?,
        OracleSeparator::RatioOraclePhase => {
            let rm = oracle_rm(clean, noisy)?;
            let mut data = noisy.data.clone();
            for ((t, f), z) in data.indexed_iter_mut() {
                let mag = rm.planes[(t, f, 0)] * z.norm();
                *z = Complex64::from_polar(mag, clean.data[(t, f)].arg());
            }
            ComplexSpectrogram {
                data,
                cfg: noisy.cfg,
                sample_rate: noisy.sample_rate,
                compressed: false,
            }
        }
    };
    Ok(istft(&spec, out_len)?)
}

/// Evaluate an ideal-mask separator over one task's test split; the upper
/// bounds the trained models are compared against.
pub fn evaluate_oracle(
    manifest: &CorpusManifest,
    task: Task,
    which: OracleSeparator,
) -> Result<EvalReport> {
    let entries = test_entries(manifest, task)?;
    let scores = par_map(entries.len(), |i| -> Result<SampleScore> {
        let entry = entries[i];
        let sample = manifest.load_sample(entry)?;
        let cfg = StftConfig::for_rate(sample.mixture.sample_rate());
        let noisy = stft(&sample.mixture, &cfg)?;
        let estimates: Vec<Waveform> = sample
            .speech
            .iter()
            .map(|s| oracle_estimate(which, &stft(s, &cfg)?, &noisy, sample.mixture.len()))
            .collect::<Result<_>>()?;
        score_sample(&entry.path, &sample, &estimates, true)
    });
    let scores: Vec<SampleScore> = scores.into_iter().collect::<Result<_>>()?;
    Ok(assemble(task, scores))
}

/// Estimate a speaker's fundamental frequency by windowed autocorrelation.
///
/// Returns the median peak over voiced windows, refined by parabolic
/// interpolation, or `None` when no window shows a credible period in the
/// 80..260 Hz search band.
pub fn estimate_f0(w: &Waveform) -> Option<f64> {
    let rate = w.sample_rate() as f64;
    let win = (0.064 * rate) as usize;
    let hop = win / 2;
    let lag_min = (rate / 260.0).floor() as usize;
    let lag_max = (rate / 80.0).ceil() as usize;
    if w.len() < win + lag_max || lag_min < 2 {
        return None;
    }

    let samples = w.samples();
    let mut voiced = Vec::new();
    let mut start = 0;
    while start + win + lag_max <= w.len() {
        let x = &samples[start..start + win + lag_max];
        let e0: f64 = x[..win].iter().map(|v| v * v).sum();
        if e0 > 1e-12 {
            let mut r_max = 0.0f64;
            let mut scores = vec![0.0; lag_max + 1];
            for lag in lag_min..=lag_max {
                let dot: f64 = (0..win).map(|t| x[t] * x[t + lag]).sum();
                let e1: f64 = (0..win).map(|t| x[t + lag] * x[t + lag]).sum();
                let r = dot / (e0 * e1).sqrt().max(1e-12);
                scores[lag] = r;
                r_max = r_max.max(r);
            }
            // Integer multiples of the period correlate as well as the
            // period itself, so take the shortest local peak within
            // tolerance of the global one rather than the argmax.
            let pick = (lag_min + 1..lag_max).find(|&lag| {
                scores[lag] >= 0.95 * r_max
                    && scores[lag] >= scores[lag - 1]
                    && scores[lag] >= scores[lag + 1]
            });
            if let (true, Some(lag)) = (r_max > 0.5, pick) {
                // Parabolic refinement around the winning lag.
                let (a, b, c) = (scores[lag - 1], scores[lag], scores[lag + 1]);
                let denom = a - 2.0 * b + c;
                let shift = if denom.abs() > 1e-12 {
                    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                };
                voiced.push(rate / (lag as f64 + shift));
            }
        }
        start += hop;
    }
    if voiced.is_empty() {
        return None;
    }
    voiced.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Some(voiced[voiced.len() / 2])
}

/// A single-stream audio-only model exposed as a speech [`Enhancer`], the
/// front end of the SNR-based dataset filter.
pub struct SpeechEnhancer<'a> {
    model: &'a AudioVisualModel,
}

impl<'a> SpeechEnhancer<'a> {
    /// The model must be audio-only (no conditioning is available inside the
    /// enhancer interface) with exactly one speaker stream.
    pub fn new(model: &'a AudioVisualModel) -> Result<Self> {
        if !model.config.audio_only || model.config.n_speaker_streams != 1 {
            return Err(TrainError::InvalidConfig(format!(
                "speech enhancer needs a one-stream audio-only model, got \
                 {} stream(s), audio_only = {}",
                model.config.n_speaker_streams, model.config.audio_only
            )));
        }
        Ok(SpeechEnhancer { model })
    }
}

impl Enhancer for SpeechEnhancer<'_> {
    fn enhance(&self, mixture: &Waveform) -> cocktail_metrics::Result<Waveform> {
        separate_streams(self.model, mixture, &[])
            .map(|mut outs| outs.remove(0))
            .map_err(|e| MetricsError::Enhancer(e.to_string()))
    }
}

/// Re-mix a noisy sample's stored sources at an exact speech-to-noise ratio.
pub fn remix_at_snr(sample: &MixtureSample, snr_db: f64) -> Result<Waveform> {
    let noise = sample.noise.as_ref().ok_or_else(|| {
        TrainError::InvalidConfig(format!(
            "task {} carries no interference to re-mix",
            sample.task.tag()
        ))
    })?;
    let refs: Vec<&Waveform> = sample.speech.iter().collect();
    let speech = Waveform::sum(&refs)?;
    let (es, en) = (speech.energy(), noise.energy());
    if es <= 0.0 || en <= 0.0 {
        return Err(TrainError::InvalidConfig(
            "re-mixing needs non-silent speech and interference".into(),
        ));
    }
    let gain = (es / (en * 10f64.powf(snr_db / 10.0))).sqrt();
    Ok(Waveform::sum(&[&speech, &noise.scaled(gain)])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cocktail_dsp::waveform::SAMPLE_RATE_DESK;

    fn harmonic(f0: f64, dur_s: f64) -> Waveform {
        let rate = SAMPLE_RATE_DESK;
        let n = (dur_s * rate as f64) as usize;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / rate as f64;
                (1..=4)
                    .map(|h| (2.0 * std::f64::consts::PI * f0 * h as f64 * t).sin() / h as f64)
                    .sum()
            })
            .collect();
        Waveform::new(samples, rate).unwrap()
    }

    #[test]
    fn autocorrelation_recovers_harmonic_pitch() {
        for f0 in [95.0, 120.0, 185.0, 240.0] {
            let est = estimate_f0(&harmonic(f0, 0.8)).expect("voiced");
            assert!(
                (est - f0).abs() < 3.0,
                "f0 {f0} Hz estimated as {est:.2} Hz"
            );
        }
    }

    #[test]
    fn pitch_split_separates_the_pools() {
        let low = estimate_f0(&harmonic(100.0, 0.8)).unwrap();
        let high = estimate_f0(&harmonic(220.0, 0.8)).unwrap();
        assert!(low < LOW_F0_SPLIT_HZ && high >= LOW_F0_SPLIT_HZ);
    }

    #[test]
    fn silence_has_no_pitch() {
        let w = Waveform::zeros(8_000, SAMPLE_RATE_DESK).unwrap();
        assert_eq!(estimate_f0(&w), None);
    }

    #[test]
    fn permutations_enumerate_without_repeats() {
        let p3 = permutations(3);
        assert_eq!(p3.len(), 6);
        for p in &p3 {
            let mut q = p.clone();
            q.sort_unstable();
            assert_eq!(q, vec![0, 1, 2]);
        }
        assert_eq!(permutations(2), vec![vec![0, 1], vec![1, 0]]);
    }
}
