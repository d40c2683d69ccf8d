//! Training hyper-parameters and the halving learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainError};

/// Reference-scale base learning rate.
pub const PAPER_LR0: f64 = 3e-5;
/// Desk-scale base learning rate.
pub const DESK_LR0: f64 = 1e-3;

/// Optimizer and schedule settings.  The learning rate halves every
/// `halve_every` steps: `lr(step) = lr0 · 0.5^floor(step / halve_every)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr0: f64,
    pub halve_every: usize,
    pub total_steps: usize,
    /// Write a checkpoint after every this many steps (the final state is
    /// always written).
    pub checkpoint_every: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Reference-scale schedule: 5M steps, halving every 1.8M.
    pub fn paper(seed: u64) -> Self {
        TrainConfig {
            batch_size: 6,
            lr0: PAPER_LR0,
            halve_every: 1_800_000,
            total_steps: 5_000_000,
            checkpoint_every: 100_000,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed,
        }
    }

    /// Desk-scale schedule: the reference regimen compressed into
    /// `total_steps`, halving the rate at 1/3 and 2/3 of the budget.
    pub fn desk(total_steps: usize, seed: u64) -> Self {
        TrainConfig {
            batch_size: 6,
            lr0: DESK_LR0,
            halve_every: (total_steps / 3).max(1),
            total_steps,
            checkpoint_every: (total_steps / 4).max(1),
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed,
        }
    }

    /// Learning rate at `step`.
    pub fn lr(&self, step: usize) -> f64 {
        self.lr0 * 0.5_f64.powi((step / self.halve_every) as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || self.total_steps == 0
            || self.halve_every == 0
            || self.checkpoint_every == 0
        {
            return Err(TrainError::InvalidConfig(
                "batch size, step counts, and checkpoint interval must be positive".into(),
            ));
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return Err(TrainError::InvalidConfig(format!(
                "base learning rate must be positive, got {}",
                self.lr0
            )));
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(TrainError::InvalidConfig(format!(
                    "adam {name} must lie in [0, 1), got {b}"
                )));
            }
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return Err(TrainError::InvalidConfig(
                "adam epsilon must be positive".into(),
            ));
        }
        Ok(())
    }
}
