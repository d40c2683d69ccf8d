//! Error type spanning the training/evaluation surface.

use std::path::PathBuf;

use cocktail_corpus::CorpusError;
use cocktail_dsp::DspError;
use cocktail_metrics::MetricsError;
use cocktail_net::NetError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Dsp(#[from] DspError),

    #[error(transparent)]
    Net(#[from] NetError),

    #[error(transparent)]
    Corpus(#[from] CorpusError),

    #[error(transparent)]
    Metrics(#[from] MetricsError),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "model with {model_streams} speaker stream(s) cannot run task {task} \
         ({task_speakers} speaker(s))"
    )]
    TaskMismatch {
        model_streams: usize,
        task_speakers: usize,
        task: &'static str,
    },

    #[error(
        "noise-head mismatch: model predicts a noise mask = {model_predicts}, \
         task carries noise = {task_has}"
    )]
    NoiseMismatch {
        model_predicts: bool,
        task_has: bool,
    },

    #[error("loss became non-finite at step {step}; aborting")]
    NanLoss { step: usize },

    #[error("no {split} samples for task {task}")]
    EmptySplit {
        task: &'static str,
        split: &'static str,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl TrainError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TrainError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, TrainError>;
