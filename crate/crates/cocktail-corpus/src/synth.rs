//! Source synthesis: speech-like utterances with articulation-correlated
//! embedding streams, and structured non-speech interference.
//!
//! An utterance is a sawtooth approximation of a glottal pulse train at a
//! slowly wandering pitch, shaped by the speaker's three formant resonators
//! and amplitude-modulated at syllable rate. Its embedding stream encodes the
//! speaker identity vector plus a projection of instantaneous articulation
//! features, so the visual pathway genuinely carries separation-relevant
//! information. Everything is a pure function of `(speaker, seed)`.

use cocktail_dsp::embed::EMBEDDING_FPS;
use cocktail_dsp::spectral::stft;
use cocktail_dsp::{EmbeddingStream, StftConfig, Waveform};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{PI, TAU};

use crate::error::CorpusError;
use crate::mix_seed;
use crate::speaker::SpeakerModel;
use crate::Result;

/// Target RMS of a normalized utterance.
pub const SPEECH_RMS: f64 = 0.1;
/// Per-source peak never exceeds this. Three limited sources plus scaled
/// interference always sum inside [-1, 1], so WAV export never clips.
pub const SPEECH_PEAK_CAP: f64 = 0.32;
/// Soft limiter knee: samples below this pass through untouched.
const LIMIT_KNEE: f64 = 0.19;
/// Soft limiter ceiling, kept under [`SPEECH_PEAK_CAP`] so the post-limit
/// RMS touch-up cannot push peaks past the cap.
const LIMIT_CEIL: f64 = 0.30;
/// Target RMS of raw interference before the mixture-level gain.
pub const NOISE_RMS: f64 = 0.1;
/// Length of the articulation feature vector `a(t)`:
/// pitch deviation, amplitude envelope, three per-formant log energies.
pub const ARTICULATION_DIM: usize = 5;

/// Seed of the fixed projection from articulation features to embedding
/// space. Shared by every speaker and utterance so the mapping is a single
/// global linear code, not per-clip randomness.
const PROJECTION_SEED: u64 = 0x0A11_D10_FEA7;
const UTTERANCE_SEED_TAG: u64 = 0x5EED_0002;
const NOISE_SEED_TAG: u64 = 0x5EED_0003;

/// Knobs for utterance synthesis. Defaults reproduce the corpus recipe;
/// tests zero `articulation_weight`/`noise_sigma` to isolate pathways.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    /// Clip length in seconds; at least 0.2 s.
    pub duration_s: f64,
    /// Output rate in Hz (8000 or 16000).
    pub sample_rate: u32,
    /// Weight of the articulation term in each embedding frame.
    pub articulation_weight: f64,
    /// Standard deviation of the additive embedding noise.
    pub noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            duration_s: 3.0,
            sample_rate: cocktail_dsp::waveform::SAMPLE_RATE_DESK,
            articulation_weight: 0.5,
            noise_sigma: 0.05,
        }
    }
}

impl SynthConfig {
    /// Number of output samples for this configuration.
    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }

    /// Number of embedding frames for this configuration.
    pub fn n_frames(&self) -> usize {
        (self.duration_s * EMBEDDING_FPS as f64).round() as usize
    }
}

/// Relative pitch deviation at time `t` for the given wander phases: two
/// incommensurate slow sinusoids, +-10 % peak excursion combined.
fn pitch_deviation(t: f64, p1: f64, p2: f64) -> f64 {
    0.06 * (TAU * 0.6 * t + p1).sin() + 0.04 * (TAU * 1.7 * t + p2).sin()
}

/// Syllable-rate amplitude envelope in [0.15, 1].
fn syllable_envelope(t: f64, rate: f64, phase: f64) -> f64 {
    0.15 + 0.85 * 0.5 * (1.0 + (TAU * rate * t + phase).cos())
}

/// Two-pole resonator with center `fc` Hz and bandwidth `bw` Hz, applied in
/// place of a proper vocal-tract filter. Gain factor `1 - r` keeps cascades
/// bounded; absolute level is set by the final normalization anyway.
fn resonate(input: &[f64], fc: f64, bw: f64, sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    let r = (-PI * bw / sr).exp();
    let c = 2.0 * r * (TAU * fc / sr).cos();
    let r2 = r * r;
    let g = 1.0 - r;
    let mut y1 = 0.0;
    let mut y2 = 0.0;
    let mut out = Vec::with_capacity(input.len());
    for &x in input {
        let y = g * x + c * y1 - r2 * y2;
        y2 = y1;
        y1 = y;
        out.push(y);
    }
    out
}

/// The fixed articulation-to-embedding projection, `dim x ARTICULATION_DIM`,
/// entries N(0, 1/ARTICULATION_DIM).
fn articulation_projection(dim: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROJECTION_SEED);
    let scale = 1.0 / (ARTICULATION_DIM as f64).sqrt();
    Array2::from_shape_fn((dim, ARTICULATION_DIM), |_| {
        let z: f64 = rng.sample(StandardNormal);
        z * scale
    })
}

/// Synthesize one utterance and its embedding stream.
///
/// Deterministic per `(spk, seed)`: the same pair always returns bit-for-bit
/// Per-utterance prosody; drawn in a fixed order so synthesis is stable.
struct Prosody {
    wander1: f64,
    wander2: f64,
    syl_rate: f64,
    syl_phase: f64,
}

impl Prosody {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Prosody {
            wander1: rng.gen_range(0.0..TAU),
            wander2: rng.gen_range(0.0..TAU),
            syl_rate: rng.gen_range(3.2..4.8),
            syl_phase: rng.gen_range(0.0..TAU),
        }
    }
}

/// The waveform half of utterance synthesis: excitation through the formant
/// cascade, syllable modulation, leveling, and PCM-grid quantization.
fn synth_waveform(spk: &SpeakerModel, cfg: &SynthConfig, pr: &Prosody) -> Result<Waveform> {
    let n = cfg.n_samples();
    let sr = cfg.sample_rate as f64;

    // Glottal excitation: phase-accumulator sawtooth at the pitch contour.
    let mut phase = 0.0_f64;
    let mut excitation = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sr;
        let f = spk.f0 * (1.0 + pitch_deviation(t, pr.wander1, pr.wander2));
        excitation.push(2.0 * phase - 1.0);
        phase += f / sr;
        phase -= phase.floor();
    }

    // Formant cascade, then syllable-rate amplitude modulation.
    let mut voiced = excitation;
    for &(fc, bw) in &spk.formants {
        voiced = resonate(&voiced, fc, bw, cfg.sample_rate);
    }
    for (i, v) in voiced.iter_mut().enumerate() {
        *v *= syllable_envelope(i as f64 / sr, pr.syl_rate, pr.syl_phase);
    }

    // Normalize to the target RMS, tame the rare envelope peaks with a
    // hard-knee limiter (samples under the knee are untouched, so the RMS
    // barely moves), renormalize so the RMS lands exactly on target, and
    // snap to the PCM grid so mixtures of stored sources sum exactly.
    let raw = Waveform::new(voiced, cfg.sample_rate)?;
    let rms = raw.rms();
    let mut shaped = if rms > 0.0 { raw.scaled(SPEECH_RMS / rms) } else { raw };
    // Limiting shaves RMS and renormalizing lifts peaks back, so alternate
    // the two until the renormalization becomes a no-op; each pass removes
    // geometrically less energy. The final pass is a renormalization, so
    // the stored RMS is exact.
    for _ in 0..16 {
        for v in shaped.samples_mut() {
            let a = v.abs();
            if a > LIMIT_KNEE {
                let span = LIMIT_CEIL - LIMIT_KNEE;
                *v = v.signum() * (LIMIT_KNEE + span * ((a - LIMIT_KNEE) / span).tanh());
            }
        }
        let r = shaped.rms();
        if r > 0.0 {
            shaped = shaped.scaled(SPEECH_RMS / r);
        }
        if r == 0.0 || SPEECH_RMS / r < 1.0 + 1e-4 {
            break;
        }
    }
    let peak = shaped.samples().iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    if peak > SPEECH_PEAK_CAP {
        shaped = shaped.scaled(SPEECH_PEAK_CAP / peak);
    }
    Ok(shaped.quantized_i16()?)
}

/// Synthesize one utterance and its embedding stream.
///
/// Deterministic per `(spk, seed)`: the same pair always returns bit-for-bit
/// identical output. The waveform is normalized to [`SPEECH_RMS`] (peak
/// capped at [`SPEECH_PEAK_CAP`]) and quantized to the 16-bit PCM grid, so a
/// WAV round trip is exact.
pub fn synth_utterance(
    spk: &SpeakerModel,
    cfg: &SynthConfig,
    seed: u64,
) -> Result<(Waveform, EmbeddingStream)> {
    if cfg.duration_s < 0.2 {
        return Err(CorpusError::ShortDuration(cfg.duration_s));
    }
    let n = cfg.n_samples();
    let sr = cfg.sample_rate as f64;
    let mut rng =
        ChaCha8Rng::seed_from_u64(mix_seed(mix_seed(seed, UTTERANCE_SEED_TAG), spk.id));
    let prosody = Prosody::draw(&mut rng);
    let wave = synth_waveform(spk, cfg, &prosody)?;

    // Per-frame articulation features from the normalized signal.
    let n_frames = cfg.n_frames();
    let fps = EMBEDDING_FPS as f64;
    let band = |k: usize| {
        let (fc, bw) = spk.formants[k];
        resonate(wave.samples(), fc, bw, cfg.sample_rate)
    };
    let bands = [band(0), band(1), band(2)];
    let mut features = Vec::with_capacity(n_frames);
    for fr in 0..n_frames {
        let lo = ((fr as f64 / fps) * sr) as usize;
        let hi = (((fr + 1) as f64 / fps) * sr).min(n as f64) as usize;
        let tc = (fr as f64 + 0.5) / fps;
        let mut a = [0.0_f64; ARTICULATION_DIM];
        a[0] = pitch_deviation(tc, prosody.wander1, prosody.wander2);
        a[1] = syllable_envelope(tc, prosody.syl_rate, prosody.syl_phase);
        for (k, b) in bands.iter().enumerate() {
            let span = &b[lo..hi.max(lo + 1)];
            let ms = span.iter().map(|v| v * v).sum::<f64>() / span.len() as f64;
            a[2 + k] = (ms + 1e-9).log10();
        }
        features.push(a);
    }

    // Embedding frames: normalize(id + alpha * P * a(t) + eta).
    let dim = spk.id_vector.len();
    let proj = articulation_projection(dim);
    let mut frames = Array2::<f32>::zeros((n_frames, dim));
    for (fr, a) in features.iter().enumerate() {
        let mut e: Vec<f64> = spk.id_vector.iter().map(|&v| v as f64).collect();
        for d in 0..dim {
            let mut dot = 0.0;
            for (j, &aj) in a.iter().enumerate() {
                dot += proj[(d, j)] * aj;
            }
            let eta: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.noise_sigma;
            e[d] += cfg.articulation_weight * dot + eta;
        }
        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for d in 0..dim {
                frames[(fr, d)] = (e[d] / norm) as f32;
            }
        }
    }

    Ok((wave, EmbeddingStream::new(frames)))
}

/// Synthesize non-speech interference: stationary low-passed noise, two
/// amplitude-modulated tones, a ringing impulse train, and band-limited
/// noise bursts. RMS is normalized to exactly [`NOISE_RMS`]; the output is
/// left unquantized because mixtures store a scaled copy.
pub fn synth_noise(duration_s: f64, sample_rate: u32, seed: u64) -> Result<Waveform> {
    let n = (duration_s * sample_rate as f64).round() as usize;
    if duration_s <= 0.0 || n == 0 {
        return Err(CorpusError::ShortDuration(duration_s));
    }
    let sr = sample_rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, NOISE_SEED_TAG));
    let mut out = vec![0.0_f64; n];

    // Stationary bed: one-pole low-passed white noise.
    let cutoff: f64 = rng.gen_range(600.0..1200.0);
    let a = (-TAU * cutoff / sr).exp();
    let mut y = 0.0;
    for o in out.iter_mut() {
        let x: f64 = rng.sample(StandardNormal);
        y = a * y + (1.0 - a) * x;
        *o += 4.0 * y;
    }

    // Two amplitude-modulated tones.
    for _ in 0..2 {
        let f: f64 = rng.gen_range(300.0..2800.0);
        let fm: f64 = rng.gen_range(0.5..3.0);
        let ph: f64 = rng.gen_range(0.0..TAU);
        let pm: f64 = rng.gen_range(0.0..TAU);
        for (i, o) in out.iter_mut().enumerate() {
            let t = i as f64 / sr;
            let am = 1.0 + 0.5 * (TAU * fm * t + pm).sin();
            *o += 0.35 * am * (TAU * f * t + ph).sin();
        }
    }

    // Ringing impulse train: periodic decaying-cosine clicks.
    let rate: f64 = rng.gen_range(6.0..12.0);
    let ring_f: f64 = rng.gen_range(800.0..(0.45 * sr));
    let tau: f64 = rng.gen_range(0.004..0.012);
    let start: f64 = rng.gen_range(0.0..(1.0 / rate));
    let ring_len = (6.0 * tau * sr) as usize;
    let mut click_t = start;
    while click_t < duration_s {
        let at = (click_t * sr) as usize;
        for j in 0..ring_len.min(n.saturating_sub(at)) {
            let dt = j as f64 / sr;
            out[at + j] += 2.0 * (-dt / tau).exp() * (TAU * ring_f * dt).cos();
        }
        click_t += 1.0 / rate;
    }

    // Transient band-limited noise bursts with raised-cosine edges.
    let n_bursts = (1.5 * duration_s).round().max(1.0) as usize + rng.gen_range(0..=2);
    for _ in 0..n_bursts {
        let len = ((rng.gen_range(0.03..0.12) * sr) as usize).max(8).min(n);
        let at = rng.gen_range(0..=(n - len));
        let fc: f64 = rng.gen_range(500.0..(0.45 * sr));
        let white: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let shaped = resonate(&white, fc, 200.0, sample_rate);
        for (j, &v) in shaped.iter().enumerate() {
            let win = 0.5 * (1.0 - (TAU * j as f64 / len as f64).cos());
            out[at + j] += 1.5 * win * v;
        }
    }

    let raw = Waveform::new(out, sample_rate)?;
    let rms = raw.rms();
    Ok(raw.scaled(NOISE_RMS / rms))
}

/// Probe seed for [`spectral_signature`]; one fixed prosody for every
/// speaker so signatures are comparable.
const SIGNATURE_PROBE_SEED: u64 = 0x5EED_0006;

/// Long-term power spectrum of a fixed one-second probe utterance. The
/// speaker pool compares these to keep its voices mutually distinguishable.
pub(crate) fn spectral_signature(spk: &SpeakerModel) -> Result<Vec<f64>> {
    let cfg = SynthConfig { duration_s: 1.0, ..SynthConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(SIGNATURE_PROBE_SEED);
    let prosody = Prosody::draw(&mut rng);
    let wave = synth_waveform(spk, &cfg, &prosody)?;
    let spec = stft(&wave, &StftConfig::desk())?;
    let mag = spec.magnitude();
    let (frames, bins) = mag.dim();
    Ok((0..bins)
        .map(|b| (0..frames).map(|t| mag[(t, b)] * mag[(t, b)]).sum::<f64>() / frames as f64)
        .collect())
}

/// Cosine distance between two nonnegative spectra.
pub(crate) fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (na * nb + 1e-12)
}
