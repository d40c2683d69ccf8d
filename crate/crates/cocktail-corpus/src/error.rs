//! Corpus error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors from corpus synthesis and manifest I/O.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Dsp(#[from] cocktail_dsp::DspError),

    /// Mixture sources must be distinct speakers.
    #[error("sources must differ: speaker {0} appears twice")]
    DuplicateSpeaker(u64),

    /// Wrong number of speaker models for the task.
    #[error("task {task} needs {need} speakers, got {got}")]
    SpeakerCount { task: String, need: usize, got: usize },

    /// Per-task sample counts below the minimum.
    #[error("task {task} count {n} below minimum 10")]
    CountTooSmall { task: String, n: usize },

    /// A corpus build with no samples requested.
    #[error("no samples requested; set at least one task count")]
    EmptyCorpus,

    /// Speaker pool cannot cover the requested tasks.
    #[error("speaker pool of {pool} too small (need >= {need} per split)")]
    PoolTooSmall { pool: usize, need: usize },

    /// Utterance or noise duration below the synthesizable minimum.
    #[error("duration {0} s too short to synthesize")]
    ShortDuration(f64),

    /// Rejection sampling could not place another distinguishable speaker.
    #[error("placed only {placed} speakers at pairwise spectral distance {threshold}; request a smaller pool")]
    SpeakerSpace { placed: usize, threshold: f64 },

    /// Mixture sum left the representable amplitude range.
    #[error("mixture peak {peak} exceeds unit amplitude; lower source gains")]
    Clipping { peak: f64 },

    /// Refusing to overwrite a directory that already holds a corpus.
    #[error("output directory {0} already contains a manifest; choose a fresh directory")]
    OutputExists(PathBuf),

    /// Unknown task tag in a manifest or CLI argument.
    #[error("unknown task tag {0:?}")]
    UnknownTask(String),

    /// Manifest line failed to parse.
    #[error("malformed manifest line {line}: {source}")]
    ManifestParse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CorpusError::Io { path: path.into(), source }
    }
}
