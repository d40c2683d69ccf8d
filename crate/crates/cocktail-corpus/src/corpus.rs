//! Corpus builder: deterministic sample generation, speaker-disjoint 90/10
//! split, and the JSON-lines manifest.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use cocktail_dsp::embed::{read_avse, write_avse};
use cocktail_dsp::par::par_map;
use cocktail_dsp::wav::{read_wav, write_wav};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CorpusError;
use crate::mixture::{make_mixture, MixtureSample, Task};
use crate::speaker::SpeakerPool;
use crate::synth::SynthConfig;
use crate::{mix_seed, Result};

/// Fraction of samples assigned to the train split.
pub const TRAIN_FRACTION: f64 = 0.9;
/// Smallest per-task sample count the builder accepts.
pub const MIN_TASK_COUNT: usize = 10;

const DRAW_SEED_TAG: u64 = 0x5EED_0005;

/// Which split a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Corpus recipe: how many samples of each task, over how many speakers.
#[derive(Debug, Clone)]
pub struct CorpusConfig {
    /// Sample counts indexed by [`Task::index`]; zero skips the task.
    pub counts: [usize; 4],
    /// Speaker pool size, split disjointly between train and test.
    pub n_speakers: usize,
    /// Embedding dimensionality.
    pub embed_dim: usize,
    /// Shared synthesis settings.
    pub synth: SynthConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            counts: [0; 4],
            n_speakers: 40,
            embed_dim: 64,
            synth: SynthConfig::default(),
        }
    }
}

impl CorpusConfig {
    /// Builder-style count setter.
    pub fn with_count(mut self, task: Task, n: usize) -> Self {
        self.counts[task.index()] = n;
        self
    }

    pub fn count(&self, task: Task) -> usize {
        self.counts[task.index()]
    }

    /// Tasks with a nonzero count, in canonical order.
    pub fn requested_tasks(&self) -> Vec<Task> {
        Task::ALL.into_iter().filter(|t| self.count(*t) > 0).collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Sample directory, relative to the corpus root.
    pub path: String,
    pub task: Task,
    pub split: Split,
    /// Per-sample seed; with the entry alone the sample can be regenerated.
    pub seed: u64,
    /// Speaker ids, one per speech source, in source order.
    pub speakers: Vec<u64>,
}

/// A built corpus: its root directory and the parsed manifest.
#[derive(Debug, Clone)]
pub struct CorpusManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

/// Builds every sample, writes WAV/AVSE artifacts plus `manifest.jsonl`
/// under `out_dir`, and returns the manifest.
///
/// Deterministic: a sample's content depends only on `(seed, task, index)`,
/// so rebuilding with the same seed yields byte-identical artifacts.
/// Test-split samples draw only test-split speakers.
pub fn build_corpus(cfg: &CorpusConfig, seed: u64, out_dir: &Path) -> Result<CorpusManifest> {
    for task in Task::ALL {
        let n = cfg.count(task);
        if n > 0 && n < MIN_TASK_COUNT {
            return Err(CorpusError::CountTooSmall { task: task.tag().to_string(), n });
        }
    }
    let tasks = cfg.requested_tasks();
    if tasks.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let manifest_path = out_dir.join("manifest.jsonl");
    if manifest_path.exists() {
        return Err(CorpusError::OutputExists(out_dir.to_path_buf()));
    }
    fs::create_dir_all(out_dir).map_err(|e| CorpusError::io(out_dir, e))?;

    let pool = SpeakerPool::generate(cfg.n_speakers, cfg.embed_dim, seed)?;
    let need = tasks.iter().map(|t| t.n_speakers()).max().unwrap();
    if pool.train.len() < need || pool.test.len() < need {
        return Err(CorpusError::PoolTooSmall { pool: cfg.n_speakers, need });
    }

    // Flatten the per-task plans into one deterministic sample list.
    struct Plan {
        task: Task,
        index: usize,
        split: Split,
        seed: u64,
    }
    let mut plans = Vec::with_capacity(cfg.total());
    for &task in &tasks {
        let n = cfg.count(task);
        let n_test = ((n as f64 * (1.0 - TRAIN_FRACTION)).round() as usize).max(1);
        for index in 0..n {
            let split = if index >= n - n_test { Split::Test } else { Split::Train };
            let sample_seed = mix_seed(mix_seed(seed, task.index() as u64), index as u64);
            plans.push(Plan { task, index, split, seed: sample_seed });
        }
    }

    // Samples are independent; generate and write them in parallel.
    let results: Vec<Result<ManifestEntry>> = par_map(plans.len(), |i| {
        let plan = &plans[i];
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(plan.seed, DRAW_SEED_TAG));
        let speakers = pool.draw(plan.split == Split::Test, plan.task.n_speakers(), &mut rng);
        let sample = make_mixture(plan.task, &speakers, &cfg.synth, plan.seed)?;
        let rel = format!("{}/{:05}", plan.task.dir_slug(), plan.index);
        write_sample(&out_dir.join(&rel), &sample)?;
        Ok(ManifestEntry {
            path: rel,
            task: plan.task,
            split: plan.split,
            seed: plan.seed,
            speakers: sample.speaker_ids,
        })
    });
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut lines = String::new();
    for entry in &entries {
        lines.push_str(&serde_json::to_string(entry).expect("manifest entries serialize"));
        lines.push('\n');
    }
    fs::write(&manifest_path, lines).map_err(|e| CorpusError::io(&manifest_path, e))?;
    Ok(CorpusManifest { root: out_dir.to_path_buf(), entries })
}

/// Writes one sample directory: `mix.wav`, `s<k>.wav`, optional `noise.wav`,
/// and `e<k>.avse`.
fn write_sample(dir: &Path, sample: &MixtureSample) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
    write_wav(dir.join("mix.wav"), &sample.mixture)?;
    for (k, wave) in sample.speech.iter().enumerate() {
        write_wav(dir.join(format!("s{}.wav", k + 1)), wave)?;
    }
    if let Some(noise) = &sample.noise {
        write_wav(dir.join("noise.wav"), noise)?;
    }
    for (k, embeds) in sample.embeddings.iter().enumerate() {
        write_avse(dir.join(format!("e{}.avse", k + 1)), embeds)?;
    }
    Ok(())
}

impl CorpusManifest {
    /// Parses `manifest.jsonl` under `root`.
    pub fn load(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let path = root.join("manifest.jsonl");
        let text = fs::read_to_string(&path).map_err(|e| CorpusError::io(&path, e))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(line)
                .map_err(|source| CorpusError::ManifestParse { line: i + 1, source })?;
            entries.push(entry);
        }
        Ok(CorpusManifest { root, entries })
    }

    /// Entries restricted to one split.
    pub fn split(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    /// Speaker ids appearing in the given split.
    pub fn speaker_ids(&self, split: Split) -> BTreeSet<u64> {
        self.split(split).iter().flat_map(|e| e.speakers.iter().copied()).collect()
    }

    /// Reads one sample's artifacts back from disk.
    pub fn load_sample(&self, entry: &ManifestEntry) -> Result<MixtureSample> {
        let dir = self.root.join(&entry.path);
        let mixture = read_wav(dir.join("mix.wav"))?;
        let n = entry.task.n_speakers();
        let mut speech = Vec::with_capacity(n);
        let mut embeddings = Vec::with_capacity(n);
        for k in 1..=n {
            speech.push(read_wav(dir.join(format!("s{k}.wav")))?);
            embeddings.push(read_avse(dir.join(format!("e{k}.avse")))?);
        }
        let noise = if entry.task.has_noise() {
            Some(read_wav(dir.join("noise.wav"))?)
        } else {
            None
        };
        Ok(MixtureSample {
            task: entry.task,
            seed: entry.seed,
            mixture,
            speech,
            noise,
            embeddings,
            speaker_ids: entry.speakers.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn tiny_cfg() -> CorpusConfig {
        CorpusConfig {
            n_speakers: 12,
            embed_dim: 8,
            synth: SynthConfig { duration_s: 0.6, ..SynthConfig::default() },
            ..CorpusConfig::default()
        }
        .with_count(Task::TwoSpeakerClean, 10)
    }

    #[test]
    fn hundred_samples_split_ninety_ten() {
        let dir = tempdir().unwrap();
        let cfg = CorpusConfig {
            n_speakers: 12,
            embed_dim: 8,
            synth: SynthConfig { duration_s: 0.25, ..SynthConfig::default() },
            ..CorpusConfig::default()
        }
        .with_count(Task::OneSpeakerNoise, 100);
        let manifest = build_corpus(&cfg, 7, dir.path()).unwrap();
        assert_eq!(manifest.entries.len(), 100);
        assert_eq!(manifest.split(Split::Train).len(), 90);
        assert_eq!(manifest.split(Split::Test).len(), 10);
    }

    #[test]
    fn splits_are_speaker_disjoint() {
        let dir = tempdir().unwrap();
        let manifest = build_corpus(&tiny_cfg(), 11, dir.path()).unwrap();
        let train = manifest.speaker_ids(Split::Train);
        let test = manifest.speaker_ids(Split::Test);
        assert!(!train.is_empty() && !test.is_empty());
        assert!(train.is_disjoint(&test), "train {train:?} vs test {test:?}");
    }

    #[test]
    fn rebuild_is_byte_identical() {
        let d1 = tempdir().unwrap();
        let d2 = tempdir().unwrap();
        let m1 = build_corpus(&tiny_cfg(), 5, d1.path()).unwrap();
        build_corpus(&tiny_cfg(), 5, d2.path()).unwrap();
        let bytes = |d: &Path, rel: &str| fs::read(d.join(rel)).unwrap();
        assert_eq!(
            bytes(d1.path(), "manifest.jsonl"),
            bytes(d2.path(), "manifest.jsonl")
        );
        let rel = &m1.entries[0].path;
        for name in ["mix.wav", "s1.wav", "e2.avse"] {
            assert_eq!(
                bytes(d1.path(), &format!("{rel}/{name}")),
                bytes(d2.path(), &format!("{rel}/{name}")),
                "{name} differs between rebuilds"
            );
        }
    }

    #[test]
    fn loaded_samples_preserve_the_sum_identity() {
        let dir = tempdir().unwrap();
        let cfg = CorpusConfig {
            n_speakers: 12,
            embed_dim: 8,
            synth: SynthConfig { duration_s: 0.6, ..SynthConfig::default() },
            ..CorpusConfig::default()
        }
        .with_count(Task::TwoSpeakerNoise, 10);
        let manifest = build_corpus(&cfg, 13, dir.path()).unwrap();
        let sample = manifest.load_sample(&manifest.entries[3]).unwrap();
        let sources = sample.sources();
        assert_eq!(sources.len(), 3);
        for i in 0..sample.mixture.len() {
            let sum: f64 = sources.iter().map(|w| w.samples()[i]).sum();
            assert_eq!(sample.mixture.samples()[i], sum, "sample {i}");
        }
        assert_eq!(sample.embeddings.len(), 2);
        assert_eq!(sample.embeddings[0].dim(), 8);
    }

    #[test]
    fn manifest_load_round_trips() {
        let dir = tempdir().unwrap();
        let built = build_corpus(&tiny_cfg(), 3, dir.path()).unwrap();
        let loaded = CorpusManifest::load(dir.path()).unwrap();
        assert_eq!(built.entries, loaded.entries);
    }

    #[test]
    fn existing_manifest_is_not_overwritten() {
        let dir = tempdir().unwrap();
        build_corpus(&tiny_cfg(), 3, dir.path()).unwrap();
        let err = build_corpus(&tiny_cfg(), 3, dir.path()).unwrap_err();
        assert!(matches!(err, CorpusError::OutputExists(_)));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let dir = tempdir().unwrap();
        let too_few = tiny_cfg().with_count(Task::TwoSpeakerClean, 5);
        assert!(matches!(
            build_corpus(&too_few, 1, dir.path()).unwrap_err(),
            CorpusError::CountTooSmall { n: 5, .. }
        ));
        let empty = CorpusConfig::default();
        assert!(matches!(
            build_corpus(&empty, 1, dir.path()).unwrap_err(),
            CorpusError::EmptyCorpus
        ));
        let tiny_pool = CorpusConfig { n_speakers: 5, ..tiny_cfg() };
        assert!(matches!(
            build_corpus(&tiny_pool, 1, dir.path()).unwrap_err(),
            CorpusError::PoolTooSmall { .. }
        ));
    }

    #[test]
    fn malformed_manifest_reports_line() {
        let dir = tempdir().unwrap();
        fs::write(dir.path().join("manifest.jsonl"), "{\"path\": 3}\n").unwrap();
        let err = CorpusManifest::load(dir.path()).unwrap_err();
        assert!(matches!(err, CorpusError::ManifestParse { line: 1, .. }));
    }
}
