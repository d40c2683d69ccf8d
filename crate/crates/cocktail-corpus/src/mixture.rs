//! Mixture recipes: the four separation tasks and their exact-sum samples.

use cocktail_dsp::{EmbeddingStream, Waveform};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::CorpusError;
use crate::speaker::SpeakerModel;
use crate::synth::{synth_noise, synth_utterance, SynthConfig};
use crate::{mix_seed, Result};

/// Interference gain in every noisy recipe; fixed, never randomized.
pub const NOISE_GAIN: f64 = 0.3;

/// The four mixture recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    /// One speaker plus scaled interference.
    #[serde(rename = "1S+Noise")]
    OneSpeakerNoise,
    /// Two clean speakers.
    #[serde(rename = "2S-clean")]
    TwoSpeakerClean,
    /// Two speakers plus scaled interference.
    #[serde(rename = "2S+Noise")]
    TwoSpeakerNoise,
    /// Three clean speakers.
    #[serde(rename = "3S-clean")]
    ThreeSpeakerClean,
}

impl Task {
    /// Every task, in canonical manifest order.
    pub const ALL: [Task; 4] = [
        Task::OneSpeakerNoise,
        Task::TwoSpeakerClean,
        Task::TwoSpeakerNoise,
        Task::ThreeSpeakerClean,
    ];

    /// Canonical tag used in manifests and reports.
    pub fn tag(&self) -> &'static str {
        match self {
            Task::OneSpeakerNoise => "1S+Noise",
            Task::TwoSpeakerClean => "2S-clean",
            Task::TwoSpeakerNoise => "2S+Noise",
            Task::ThreeSpeakerClean => "3S-clean",
        }
    }

    /// Filesystem-safe directory name.
    pub fn dir_slug(&self) -> &'static str {
        match self {
            Task::OneSpeakerNoise => "1s-noise",
            Task::TwoSpeakerClean => "2s-clean",
            Task::TwoSpeakerNoise => "2s-noise",
            Task::ThreeSpeakerClean => "3s-clean",
        }
    }

    /// Number of speaker sources in the recipe.
    pub fn n_speakers(&self) -> usize {
        match self {
            Task::OneSpeakerNoise => 1,
            Task::TwoSpeakerClean | Task::TwoSpeakerNoise => 2,
            Task::ThreeSpeakerClean => 3,
        }
    }

    /// True when the recipe adds scaled interference.
    pub fn has_noise(&self) -> bool {
        matches!(self, Task::OneSpeakerNoise | Task::TwoSpeakerNoise)
    }

    /// Position in [`Task::ALL`].
    pub fn index(&self) -> usize {
        Task::ALL.iter().position(|t| t == self).unwrap()
    }

    /// Parses a tag or directory slug, case-insensitively.
    pub fn parse(s: &str) -> Result<Task> {
        let norm = s.trim().to_ascii_lowercase().replace('+', "-");
        for task in Task::ALL {
            if norm == task.dir_slug() {
                return Ok(task);
            }
        }
        Err(CorpusError::UnknownTask(s.to_string()))
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One training/evaluation unit: a mixture, its reference sources, and one
/// embedding stream per speaker.
#[derive(Debug, Clone)]
pub struct MixtureSample {
    pub task: Task,
    pub seed: u64,
    /// Exact sample-wise sum of `speech` and `noise`.
    pub mixture: Waveform,
    /// Speaker references, stored unscaled (synthesis normalization only).
    pub speech: Vec<Waveform>,
    /// Interference reference, stored post-[`NOISE_GAIN`] so the sum
    /// identity holds on the stored data.
    pub noise: Option<Waveform>,
    /// One stream per entry of `speech`, same order.
    pub embeddings: Vec<EmbeddingStream>,
    pub speaker_ids: Vec<u64>,
}

impl MixtureSample {
    /// All reference sources: speakers first, then interference if present.
    pub fn sources(&self) -> Vec<&Waveform> {
        self.speech.iter().chain(self.noise.iter()).collect()
    }

    pub fn n_speakers(&self) -> usize {
        self.speech.len()
    }
}

/// Seed tag separating the speaker-utterance streams inside one sample.
const SOURCE_SEED_TAG: u64 = 0x5EED_0004;

/// Builds one mixture per the task recipe.
///
/// Stored sources are on the 16-bit PCM grid, so `mixture` equals the
/// sample-wise sum of the stored sources exactly (and survives a WAV round
/// trip bit-for-bit). Interference is scaled by exactly [`NOISE_GAIN`]
/// before storage.
pub fn make_mixture(
    task: Task,
    speakers: &[&SpeakerModel],
    synth: &SynthConfig,
    seed: u64,
) -> Result<MixtureSample> {
    if speakers.len() != task.n_speakers() {
        return Err(CorpusError::SpeakerCount {
            task: task.tag().to_string(),
            need: task.n_speakers(),
            got: speakers.len(),
        });
    }
    for (i, a) in speakers.iter().enumerate() {
        if speakers[..i].iter().any(|b| b.id == a.id) {
            return Err(CorpusError::DuplicateSpeaker(a.id));
        }
    }

    let mut speech = Vec::with_capacity(speakers.len());
    let mut embeddings = Vec::with_capacity(speakers.len());
    for (k, spk) in speakers.iter().enumerate() {
        let utt_seed = mix_seed(mix_seed(seed, SOURCE_SEED_TAG), k as u64);
        let (wave, embeds) = synth_utterance(spk, synth, utt_seed)?;
        speech.push(wave);
        embeddings.push(embeds);
    }
    let noise = if task.has_noise() {
        let raw = synth_noise(synth.duration_s, synth.sample_rate, seed)?;
        Some(raw.scaled(NOISE_GAIN).quantized_i16()?)
    } else {
        None
    };

    let sources: Vec<&Waveform> = speech.iter().chain(noise.iter()).collect();
    let mixture = Waveform::sum(&sources)?;
    let peak = mixture.samples().iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    if peak > 1.0 {
        return Err(CorpusError::Clipping { peak });
    }

    Ok(MixtureSample {
        task,
        seed,
        mixture,
        speech,
        noise,
        embeddings,
        speaker_ids: speakers.iter().map(|s| s.id).collect(),
    })
}
