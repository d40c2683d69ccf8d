//! The training loop: sequential batch draws from a seeded stream, parallel
//! per-sample passes, ordered gradient reduction, Adam updates on the
//! halving schedule.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cocktail_corpus::{mix_seed, CorpusManifest, Task};
use cocktail_dsp::par::par_map;
use cocktail_net::{
    ordered_loss_head, pit_loss_head, save_checkpoint, AudioVisualModel, Gradients,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adam::Adam;
use crate::config::TrainConfig;
use crate::data::{crop, crop_slots, Dataset};
use crate::error::{Result, TrainError};

/// Audio frames per training window (visual frames: this / 4).
pub const CROP_FRAMES: usize = 48;

/// One row of the loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

/// Artifacts a training run leaves behind.
#[derive(Debug)]
pub struct TrainRun {
    pub curve: Vec<CurvePoint>,
    /// Periodic checkpoints, in step order.
    pub checkpoints: Vec<PathBuf>,
    /// The trained model, always written.
    pub final_checkpoint: PathBuf,
    pub curve_path: PathBuf,
}

/// Render the loss curve in CSV with full-precision values.
pub fn render_curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("step,loss,lr\n");
    for p in curve {
        writeln!(out, "{},{},{}", p.step, p.loss, p.lr).expect("string write");
    }
    out
}

/// Train `model` on one task of `manifest`, mutating it in place and writing
/// checkpoints plus `loss_curve.csv` under `out_dir`.
///
/// Audio-visual profiles fit with the fixed stream-to-source assignment;
/// the audio-only baseline searches source permutations instead.  The loop
/// is deterministic for a given seed: batch indices and crop offsets come
/// from one sequential stream, per-sample passes run in parallel but reduce
/// in batch order, and batch-norm statistics fold in that same order.
pub fn train(
    model: &mut AudioVisualModel,
    manifest: &CorpusManifest,
    task: Task,
    tc: &TrainConfig,
    out_dir: impl AsRef<Path>,
) -> Result<TrainRun> {
    tc.validate()?;
    let out_dir = out_dir.as_ref();
    let dataset = Dataset::build(manifest, task, &model.config)?;
    let slots: Vec<usize> = dataset
        .items
        .iter()
        .map(|it| crop_slots(it, CROP_FRAMES))
        .collect::<Result<_>>()?;
    fs::create_dir_all(out_dir).map_err(|e| TrainError::io(out_dir, e))?;

    let mut adam = Adam::new(model, tc);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(tc.seed, task.index() as u64));
    let mut curve = Vec::with_capacity(tc.total_steps);
    let mut checkpoints = Vec::new();

    for step in 0..tc.total_steps {
        // Draws are sequential so the schedule of samples and crops depends
        // only on the seed, never on thread timing.
        let picks: Vec<(usize, usize)> = (0..tc.batch_size)
            .map(|_| {
                let i = rng.gen_range(0..dataset.items.len());
                (i, rng.gen_range(0..slots[i]))
            })
            .collect();

        let shared: &AudioVisualModel = model;
        let passes = par_map(picks.len(), |b| -> Result<_> {
            let (i, slot) = picks[b];
            let c = crop(&dataset.items[i], CROP_FRAMES, slot);
            let (_, tape) = shared.forward_training(&c.input, &c.embeddings)?;
            let (loss, du) = if shared.config.audio_only {
                let (loss, du, _) = pit_loss_head(
                    &tape.u,
                    &shared.config,
                    &c.noisy,
                    &c.speaker_targets,
                    c.noise_target.as_ref(),
                )?;
                (loss, du)
            } else {
                ordered_loss_head(
                    &tape.u,
                    &shared.config,
                    &c.noisy,
                    &c.speaker_targets,
                    c.noise_target.as_ref(),
                )?
            };
            let grads = shared.backward(&tape, &du)?;
            Ok((loss, grads, tape))
        });

        let mut batch: Option<(f64, Gradients)> = None;
        let inv = 1.0 / tc.batch_size as f64;
        for pass in passes {
            let (loss, grads, tape) = pass?;
            model.update_running_stats(&tape);
            match &mut batch {
                None => {
                    let mut grads = grads;
                    for (_, g) in &mut grads {
                        *g *= inv;
                    }
                    batch = Some((loss * inv, grads));
                }
                Some((total, acc)) => {
                    *total += loss * inv;
                    for ((_, a), (_, g)) in acc.iter_mut().zip(&grads) {
                        a.scaled_add(inv, g);
                    }
                }
            }
        }
        let (loss, grads) = batch.expect("batch size is validated positive");
        if !loss.is_finite() {
            return Err(TrainError::NanLoss { step });
        }

        let lr = tc.lr(step);
        adam.step(model, &grads, lr);
        curve.push(CurvePoint { step, loss, lr });

        if (step + 1) % tc.checkpoint_every == 0 {
            let path = out_dir.join(format!("checkpoint-{:08}.avsm", step + 1));
            save_checkpoint(&path, model)?;
            checkpoints.push(path);
        }
    }

    let final_checkpoint = out_dir.join("model.avsm");
    save_checkpoint(&final_checkpoint, model)?;
    let curve_path = out_dir.join("loss_curve.csv");
    fs::write(&curve_path, render_curve_csv(&curve))
        .map_err(|e| TrainError::io(&curve_path, e))?;

    Ok(TrainRun {
        curve,
        checkpoints,
        final_checkpoint,
        curve_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_csv_keeps_full_precision() {
        let curve = [
            CurvePoint {
                step: 0,
                loss: 0.123456789123456,
                lr: 1e-3,
            },
            CurvePoint {
                step: 1,
                loss: 0.5,
                lr: 5e-4,
            },
        ];
        let text = render_curve_csv(&curve);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("step,loss,lr"));
        assert_eq!(lines.next(), Some("0,0.123456789123456,0.001"));
        assert_eq!(lines.next(), Some("1,0.5,0.0005"));
        assert_eq!(lines.next(), None);
    }
}
