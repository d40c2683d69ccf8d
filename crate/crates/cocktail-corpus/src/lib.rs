//! Synthetic audio-visual corpus generation.
//!
//! Speakers are parametric voice models (pitch base, formant stack, identity
//! vector); utterances are sawtooth-excited formant resonators under a
//! syllable-rate amplitude envelope, paired with a 25 fps embedding stream
//! that mixes the identity vector with projected articulation features.
//! Mixtures sum quantized sources exactly, so `mixture == sum(sources)`
//! survives a WAV round trip bit for bit.
//!
//! Every artifact is a pure function of (configuration, seed).

pub mod corpus;
pub mod error;
pub mod mixture;
pub mod speaker;
pub mod synth;

pub use corpus::{build_corpus, CorpusConfig, CorpusManifest, ManifestEntry, Split};
pub use error::CorpusError;
pub use mixture::{make_mixture, MixtureSample, Task, NOISE_GAIN};
pub use speaker::{SpeakerModel, SpeakerPool};
pub use synth::{synth_noise, synth_utterance, SynthConfig};

/// Result alias for corpus operations.
pub type Result<T> = std::result::Result<T, CorpusError>;

/// SplitMix64 step; the workhorse for deriving independent sub-seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
