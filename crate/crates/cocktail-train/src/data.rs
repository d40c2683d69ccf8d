//! In-memory training set: precomputed spectrogram grids and embeddings,
//! plus the stream-assignment protocol tying a model profile to a task.

use cocktail_corpus::corpus::{CorpusManifest, Split};
use cocktail_corpus::mixture::{MixtureSample, Task};
use cocktail_dsp::spectral::{stft, ComplexSpectrogram, StftConfig};
use cocktail_dsp::Complex64;
use cocktail_net::ModelConfig;
use ndarray::Array2;

use crate::error::{Result, TrainError};

/// How a model's speaker streams map onto a task's sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// One stream per source; targets keep source order.
    Matched,
    /// Single-stream model on a multi-speaker task: each source becomes its
    /// own training item (and its own forward pass at inference).
    PerSpeaker,
}

/// Decide how `cfg` runs on `task`, or reject the pairing.
pub fn protocol_for(cfg: &ModelConfig, task: Task) -> Result<Protocol> {
    if cfg.predicts_noise_mask != task.has_noise() {
        return Err(TrainError::NoiseMismatch {
            model_predicts: cfg.predicts_noise_mask,
            task_has: task.has_noise(),
        });
    }
    if cfg.n_speaker_streams == task.n_speakers() {
        return Ok(Protocol::Matched);
    }
    if !cfg.audio_only && cfg.n_speaker_streams == 1 && task.n_speakers() > 1 {
        return Ok(Protocol::PerSpeaker);
    }
    Err(TrainError::TaskMismatch {
        model_streams: cfg.n_speaker_streams,
        task_speakers: task.n_speakers(),
        task: task.tag(),
    })
}

/// One precomputed training unit: everything a forward/backward pass and its
/// loss need, on the full (uncropped) clip.
pub struct TrainItem {
    /// Uncompressed mixture bins (the loss-side reference).
    pub noisy_unc: Array2<Complex64>,
    /// Compressed mixture bins (the network input).
    pub noisy_comp: Array2<Complex64>,
    /// Compressed clean grids, one per model speaker stream.
    pub speaker_targets: Vec<Array2<Complex64>>,
    /// Compressed interference grid when the task carries noise.
    pub noise_target: Option<Array2<Complex64>>,
    /// Raw embedding matrices, one per model visual stream.
    pub embeddings: Vec<Array2<f32>>,
    pub stft: StftConfig,
    pub sample_rate: u32,
}

impl TrainItem {
    pub fn n_frames(&self) -> usize {
        self.noisy_unc.nrows()
    }

    pub fn vis_frames(&self) -> Option<usize> {
        self.embeddings.first().map(|e| e.nrows())
    }
}

/// Expand one corpus sample into training items under `protocol`.
pub fn items_from_sample(
    sample: &MixtureSample,
    cfg: &ModelConfig,
    protocol: Protocol,
) -> Result<Vec<TrainItem>> {
    let rate = sample.mixture.sample_rate();
    let stft_cfg = StftConfig::for_rate(rate);
    let noisy = stft(&sample.mixture, &stft_cfg)?;
    let noisy_comp = noisy.compress()?;
    let compress_grid = |w: &cocktail_dsp::waveform::Waveform| -> Result<Array2<Complex64>> {
        Ok(stft(w, &stft_cfg)?.compress()?.data)
    };
    let speech_grids: Vec<Array2<Complex64>> = sample
        .speech
        .iter()
        .map(|w| compress_grid(w))
        .collect::<Result<_>>()?;
    let noise_target = match (&sample.noise, cfg.predicts_noise_mask) {
        (Some(n), true) => Some(compress_grid(n)?),
        _ => None,
    };

    let item = |targets: Vec<Array2<Complex64>>, embeddings: Vec<Array2<f32>>| TrainItem {
        noisy_unc: noisy.data.clone(),
        noisy_comp: noisy_comp.data.clone(),
        speaker_targets: targets,
        noise_target: noise_target.clone(),
        embeddings,
        stft: stft_cfg,
        sample_rate: rate,
    };

    let embeddings_of = |k: usize| sample.embeddings[k].data.clone();
    Ok(match protocol {
        Protocol::Matched => {
            let embs = if cfg.audio_only {
                Vec::new()
            } else {
                (0..sample.n_speakers()).map(embeddings_of).collect()
            };
            vec![item(speech_grids, embs)]
        }
        Protocol::PerSpeaker => (0..sample.n_speakers())
            .map(|k| item(vec![speech_grids[k].clone()], vec![embeddings_of(k)]))
            .collect(),
    })
}

/// The training split of one task, expanded and precomputed.
pub struct Dataset {
    pub items: Vec<TrainItem>,
    pub protocol: Protocol,
}

impl Dataset {
    pub fn build(manifest: &CorpusManifest, task: Task, cfg: &ModelConfig) -> Result<Dataset> {
        let protocol = protocol_for(cfg, task)?;
        let entries: Vec<_> = manifest
            .split(Split::Train)
            .into_iter()
            .filter(|e| e.task == task)
            .collect();
        if entries.is_empty() {
            return Err(TrainError::EmptySplit {
                task: task.tag(),
                split: "train",
            });
        }
        let mut items = Vec::new();
        for entry in entries {
            let sample = manifest.load_sample(entry)?;
            items.extend(items_from_sample(&sample, cfg, protocol)?);
        }
        Ok(Dataset { items, protocol })
    }
}

/// Cropped views of one item, ready for a forward pass.
pub struct Crop {
    pub input: ComplexSpectrogram,
    pub noisy: ComplexSpectrogram,
    pub speaker_targets: Vec<Array2<Complex64>>,
    pub noise_target: Option<Array2<Complex64>>,
    pub embeddings: Vec<cocktail_dsp::embed::EmbeddingStream>,
}

/// Number of valid 4-aligned crop origins for `crop_frames` audio frames.
pub fn crop_slots(item: &TrainItem, crop_frames: usize) -> Result<usize> {
    if item.n_frames() < crop_frames {
        return Err(TrainError::InvalidConfig(format!(
            "clip has {} frames, below the {crop_frames}-frame training window",
            item.n_frames()
        )));
    }
    let mut max4 = (item.n_frames() - crop_frames) / 4;
    if let Some(v) = item.vis_frames() {
        // The visual crop must stay inside the embedding stream.
        let vis_crop = crop_frames / 4;
        if v < vis_crop {
            return Err(TrainError::InvalidConfig(format!(
                "embedding stream has {v} frames, below the {vis_crop}-frame window"
            )));
        }
        max4 = max4.min(v - vis_crop);
    }
    Ok(max4 + 1)
}

/// Cut the aligned window starting at slot `slot4` (audio frame `4·slot4`).
pub fn crop(item: &TrainItem, crop_frames: usize, slot4: usize) -> Crop {
    let t0 = 4 * slot4;
    let t1 = t0 + crop_frames;
    let grid = |g: &Array2<Complex64>| g.slice(ndarray::s![t0..t1, ..]).to_owned();
    let spec = |data, compressed| ComplexSpectrogram {
        data,
        cfg: item.stft,
        sample_rate: item.sample_rate,
        compressed,
    };
    let v0 = slot4;
    let v1 = slot4 + crop_frames / 4;
    Crop {
        input: spec(grid(&item.noisy_comp), true),
        noisy: spec(grid(&item.noisy_unc), false),
        speaker_targets: item.speaker_targets.iter().map(&grid).collect(),
        noise_target: item.noise_target.as_ref().map(&grid),
        embeddings: item
            .embeddings
            .iter()
            .map(|e| {
                cocktail_dsp::embed::EmbeddingStream::new(
                    e.slice(ndarray::s![v0..v1, ..]).to_owned(),
                )
            })
            .collect(),
    }
}
